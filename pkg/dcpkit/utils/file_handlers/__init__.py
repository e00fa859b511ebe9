"""Artifact handlers for images, landmarks, feature containers and models."""

from dcpkit.utils.file_handlers.base import (
    ArtifactHandler,
    ArtifactIntegrityError,
    BlockContainer,
)
from dcpkit.utils.file_handlers.blocks import (
    BlockFileHandler,
    read_blocks,
    sidecar_path,
    write_blocks,
)
from dcpkit.utils.file_handlers.factory import ArtifactHandlerFactory, load_artifact, save_artifact
from dcpkit.utils.file_handlers.images import LandmarkFileHandler, PgmFileHandler
from dcpkit.utils.file_handlers.models import (
    ModelFileHandler,
    container_to_model,
    model_to_container,
)

__all__ = [
    "ArtifactHandler",
    "ArtifactIntegrityError",
    "BlockContainer",
    "BlockFileHandler",
    "read_blocks",
    "write_blocks",
    "sidecar_path",
    "ArtifactHandlerFactory",
    "load_artifact",
    "save_artifact",
    "PgmFileHandler",
    "LandmarkFileHandler",
    "ModelFileHandler",
    "model_to_container",
    "container_to_model",
]
