"""Handlers for PGM images and 49-point landmark files."""

from pathlib import Path

from dcpkit.core.imaging import (
    GrayImage,
    LandmarkSet,
    load_landmarks,
    load_pgm,
    save_landmarks,
    save_pgm,
)
from dcpkit.utils.file_handlers.base import ArtifactHandler


class PgmFileHandler(ArtifactHandler):
    suffixes = (".pgm",)

    def load(self, path: Path) -> GrayImage:
        return load_pgm(path)

    def save(self, obj: GrayImage, path: Path, **meta) -> Path:
        return save_pgm(obj, path)


class LandmarkFileHandler(ArtifactHandler):
    suffixes = (".pts",)

    def load(self, path: Path) -> LandmarkSet:
        return load_landmarks(path)

    def save(self, obj: LandmarkSet, path: Path, **meta) -> Path:
        return save_landmarks(obj, path)
