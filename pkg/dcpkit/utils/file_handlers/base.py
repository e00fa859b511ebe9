"""Base types for artifact handlers: BlockContainer and the ArtifactHandler ABC."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from dcpkit.core.errors import InputError
from dcpkit.utils.logger import get_logger

logger = get_logger(__name__)


class ArtifactIntegrityError(InputError):
    """Payload does not match the hash or layout recorded in its sidecar."""

    code = "artifact_integrity"


@dataclass
class BlockContainer:
    """Named arrays plus free-form header fields.

    Attributes:
        blocks: Arrays in write order; stored little-endian.
        header: JSON-serializable metadata (config hash, seed, layouts, ...).
    """

    blocks: Dict[str, np.ndarray]
    header: Dict[str, Any] = field(default_factory=dict)


class ArtifactHandler:
    """Base class for artifact handlers, selected by file suffix."""

    suffixes: Tuple[str, ...] = ()

    def can_handle(self, path: Path) -> bool:
        """Check if this handler reads and writes files like ``path``."""
        return Path(path).suffix.lower() in self.suffixes

    def load(self, path: Path) -> Any:
        raise NotImplementedError

    def save(self, obj: Any, path: Path, **meta: Any) -> Path:
        """Write ``obj`` to ``path``; ``meta`` goes into headers where supported."""
        raise NotImplementedError
