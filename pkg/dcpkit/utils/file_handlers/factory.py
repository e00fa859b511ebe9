"""Artifact handler factory + convenience entry points."""

from pathlib import Path
from typing import Any

from dcpkit.utils.file_handlers.base import ArtifactHandler
from dcpkit.utils.file_handlers.blocks import BlockFileHandler
from dcpkit.utils.file_handlers.images import LandmarkFileHandler, PgmFileHandler
from dcpkit.utils.file_handlers.models import ModelFileHandler
from dcpkit.utils.logger import get_logger

logger = get_logger(__name__)


class ArtifactHandlerFactory:
    """
    Factory selecting a handler by file suffix.

    Usage:
        handler = ArtifactHandlerFactory.get_handler(Path("face.pgm"))
        img = handler.load(Path("face.pgm"))
    """

    _handlers = [
        PgmFileHandler(),
        LandmarkFileHandler(),
        BlockFileHandler(),
        ModelFileHandler(),
    ]

    @classmethod
    def get_handler(cls, path: Path) -> ArtifactHandler:
        """
        Get appropriate handler for a path.

        Raises:
            ValueError: If no handler claims the suffix
        """
        for handler in cls._handlers:
            if handler.can_handle(path):
                return handler

        raise ValueError(f"No handler found for file: {path}")

    @classmethod
    def register_handler(cls, handler: ArtifactHandler) -> None:
        cls._handlers.append(handler)
        logger.info(f"Registered artifact handler: {handler.__class__.__name__}")


def load_artifact(path: Path) -> Any:
    return ArtifactHandlerFactory.get_handler(Path(path)).load(Path(path))


def save_artifact(obj: Any, path: Path, **meta: Any) -> Path:
    """Write ``obj`` with the handler for the suffix of ``path``."""
    return ArtifactHandlerFactory.get_handler(Path(path)).save(obj, Path(path), **meta)
