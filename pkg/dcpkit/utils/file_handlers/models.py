"""Trained model files (``.model``): PCA/WPCA, PLDA and fusion models as block containers."""

from pathlib import Path
from typing import Any, Union

import numpy as np

from dcpkit.models.enums import FusionMode
from dcpkit.services.learning import FusionModel, PcaModel, PldaModel
from dcpkit.utils.file_handlers.base import ArtifactHandler, ArtifactIntegrityError, BlockContainer
from dcpkit.utils.file_handlers.blocks import read_blocks, write_blocks

Model = Union[PcaModel, PldaModel, FusionModel]


def model_to_container(model: Model) -> BlockContainer:
    if isinstance(model, PcaModel):
        return BlockContainer(
            blocks={"mean": model.mean, "basis": model.basis, "eigenvalues": model.eigenvalues},
            header={"model_type": "pca", "d_in": model.d_in, "d_out": model.d_out},
        )
    if isinstance(model, PldaModel):
        return BlockContainer(
            blocks={
                "mean": model.mean,
                "F": model.F,
                "G": model.G,
                "noise_var": model.noise_var,
                "log_likelihoods": np.asarray(model.log_likelihoods, dtype=np.float64),
            },
            header={"model_type": "plda", "dim": model.dim, "d_h": model.d_h, "d_w": model.d_w},
        )
    if isinstance(model, FusionModel):
        return BlockContainer(
            blocks={"weights": model.weights, "bias": np.array([model.bias])},
            header={"model_type": "fusion", "mode": model.mode.value},
        )
    raise TypeError(f"Cannot serialize {type(model).__name__}")


def container_to_model(container: BlockContainer) -> Model:
    b = container.blocks
    kind = container.header.get("model_type")
    try:
        if kind == "pca":
            return PcaModel(mean=b["mean"], basis=b["basis"], eigenvalues=b["eigenvalues"])
        if kind == "plda":
            return PldaModel(
                mean=b["mean"],
                F=b["F"],
                G=b["G"],
                noise_var=b["noise_var"],
                log_likelihoods=tuple(float(v) for v in b["log_likelihoods"]),
            )
        if kind == "fusion":
            return FusionModel(
                weights=b["weights"],
                bias=float(b["bias"][0]),
                mode=FusionMode(container.header["mode"]),
            )
    except KeyError as e:
        raise ArtifactIntegrityError(f"Model file lacks block {e}") from e
    raise ArtifactIntegrityError(f"Unknown model type: {kind!r}")


class ModelFileHandler(ArtifactHandler):
    suffixes = (".model",)

    def load(self, path: Path) -> Model:
        return container_to_model(read_blocks(path))

    def save(self, obj: Model, path: Path, **meta: Any) -> Path:
        container = model_to_container(obj)
        container.header.update(meta)
        return write_blocks(container, path)
