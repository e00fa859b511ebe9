"""Pydantic schemas for configuration, manifests and reports."""

import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from dcpkit.core.errors import ConfigError, InputError
from dcpkit.models.enums import (
    DescriptorKind,
    FusionMode,
    HistogramMetric,
    Interpolation,
    PipelineName,
    Preset,
    Role,
)
from dcpkit.utils.hashing import hash_json

SCHEMA_VERSION = "1.0"

# ============================================================================
# Filter Parameters
# ============================================================================


class TTParams(BaseModel):
    """Photometric normalization chain: gamma, DoG, contrast equalization."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(default=0.2, gt=0, description="Gamma exponent")
    sigma1: float = Field(default=1.4, gt=0, description="Inner DoG sigma (px)")
    sigma2: float = Field(default=2.0, gt=0, description="Outer DoG sigma (px)")
    alpha: float = Field(default=0.1, gt=0, description="Contrast equalization exponent")
    tau: float = Field(default=10.0, gt=0, description="Contrast equalization clip threshold")

    @model_validator(mode="after")
    def _check_sigmas(self) -> "TTParams":
        if not self.sigma1 < self.sigma2:
            raise ValueError("sigma1 must be smaller than sigma2")
        return self


class FDGBank(BaseModel):
    """First-derivative-of-Gaussian filter bank."""

    model_config = ConfigDict(frozen=True)

    orientations: Tuple[float, ...] = Field(
        default=(0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4),
        min_length=1,
        description="Filter directions in radians",
    )
    sigma: float = Field(default=1.0, gt=0, description="Gaussian sigma (px)")
    kernel_radius: Optional[int] = Field(
        default=None, ge=1, description="Kernel half-width; ceil(3 sigma) when unset"
    )

    @property
    def radius(self) -> int:
        if self.kernel_radius is not None:
            return self.kernel_radius
        return max(1, math.ceil(3 * self.sigma))


# ============================================================================
# Experiment Configuration
# ============================================================================

_PRESET_DEFAULTS: Dict[Preset, dict] = {
    Preset.FERET128: {"r_in": 4.0, "r_ex": 6.0, "grid_n": 9, "photometric": True},
    Preset.MDML180: {"r_in": 2.0, "r_ex": 3.0, "photometric": True, "fusion_c": 1e-4},
    Preset.LFW_LIKE: {"r_in": 4.0, "r_ex": 6.0, "photometric": False, "fusion_c": 1.0},
}


class ExperimentConfig(BaseModel):
    """Every semantically meaningful parameter of a run. Its hash names the run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    preset: Preset = Field(default=Preset.FERET128, description="Geometry/parameter preset")
    pipeline: PipelineName = Field(default=PipelineName.DESCRIPTOR, description="Pipeline")

    # Descriptor
    descriptor: DescriptorKind = Field(default=DescriptorKind.DCP)
    r_in: float = Field(default=4.0, gt=0, description="Inner sampling radius (px)")
    r_ex: float = Field(default=6.0, gt=0, description="Outer sampling radius (px)")
    interpolation: Interpolation = Field(default=Interpolation.BILINEAR)
    grid_n: int = Field(default=9, ge=1, description="Regions per side for descriptor pipelines")
    lbp_radius: Optional[float] = Field(default=None, gt=0, description="LBP radius; r_in if unset")
    ltp_threshold: float = Field(default=5.0, ge=0, description="LTP threshold t")
    metric: HistogramMetric = Field(default=HistogramMetric.CHI2)
    histogram_normalize: bool = Field(default=False, description="L1-normalize region histograms")

    # Photometric / filtering
    photometric: bool = Field(default=True, description="Apply TT normalization")
    tt: TTParams = Field(default_factory=TTParams)
    fdg: FDGBank = Field(default_factory=FDGBank)
    include_unfiltered: bool = Field(default=False, description="Add the unfiltered image block")

    # MDML layout
    patch_size: int = Field(default=40, ge=2, description="Landmark patch side M (px)")
    patch_grid: int = Field(default=4, ge=1, description="Patch regions per side J")
    holistic_grid: int = Field(default=9, ge=1, description="Holistic crop regions per side")

    # Models
    pca_dim: int = Field(default=600, ge=1, description="PCA/WPCA output dimension")
    plda_dh: int = Field(default=100, ge=1, description="PLDA between-identity dimension")
    plda_dw: int = Field(default=100, ge=1, description="PLDA within-identity dimension")
    plda_iters: int = Field(default=50, ge=1, description="PLDA EM iterations")
    fusion: FusionMode = Field(default=FusionMode.AVERAGE)
    fusion_c: float = Field(default=1.0, gt=0, description="Linear fusion cost c")

    # Protocol
    seed: int = Field(default=0, ge=0, lt=2**64)
    rank_k_max: int = Field(default=10, ge=1)
    far_targets: Tuple[float, ...] = Field(default=(0.001, 0.01))
    n_folds: int = Field(default=10, ge=2, description="Folds when the manifest assigns none")

    @field_validator("far_targets")
    @classmethod
    def _check_far_targets(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(not 0.0 < t <= 1.0 for t in v):
            raise ValueError("far_targets must lie in (0, 1]")
        return tuple(sorted(v))

    @model_validator(mode="after")
    def _check_radii(self) -> "ExperimentConfig":
        if not self.r_in < self.r_ex:
            raise ValueError("r_in must be smaller than r_ex")
        if self.descriptor == DescriptorKind.MSLBP and not self.effective_lbp_radius < self.r_ex:
            raise ValueError("MsLBP radii must be increasing")
        return self

    @property
    def effective_lbp_radius(self) -> float:
        return self.lbp_radius if self.lbp_radius is not None else self.r_in

    @classmethod
    def from_preset(cls, preset: Preset | str, **overrides) -> "ExperimentConfig":
        """Build a config from a named preset, applying field overrides on top."""
        try:
            preset = Preset(preset)
            values = {"preset": preset, **_PRESET_DEFAULTS[preset], **overrides}
            return cls.model_validate(values)
        except (ValidationError, ValueError) as e:
            raise ConfigError(f"Invalid experiment configuration: {e}") from e

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with ``overrides`` applied, re-running every validator."""
        try:
            return type(self).model_validate({**self.model_dump(), **overrides})
        except ValidationError as e:
            raise ConfigError(f"Invalid experiment configuration: {e}") from e

    @classmethod
    def load(cls, path: Path) -> "ExperimentConfig":
        """Load a JSON config file; a ``preset`` key selects the base defaults."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise InputError(f"Config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file is not valid JSON: {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file must hold a JSON object: {path}")
        preset = data.pop("preset", Preset.FERET128.value)
        return cls.from_preset(preset, **data)

    def config_hash(self) -> str:
        return hash_json(self.model_dump(mode="json"))


# ============================================================================
# Dataset Manifests
# ============================================================================


class ManifestEntry(BaseModel):
    """One image of a dataset manifest. Paths are relative to the manifest file."""

    key: str = Field(..., min_length=1, description="Unique entry key")
    image: str = Field(..., min_length=1, description="PGM path")
    landmarks: Optional[str] = Field(default=None, description="49-point landmark file")
    subject: str = Field(..., min_length=1, description="Subject identifier")
    role: Optional[Role] = Field(default=None, description="Protocol role")


class PairEntry(BaseModel):
    """A verification pair referencing two manifest entry keys."""

    a: str
    b: str
    same: bool
    fold: Optional[int] = Field(default=None, ge=0)


class DatasetManifest(BaseModel):
    """JSON dataset description consumed by run_protocol."""

    schema_version: str = Field(default=SCHEMA_VERSION)
    entries: List[ManifestEntry] = Field(..., min_length=1)
    pairs: List[PairEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_references(self) -> "DatasetManifest":
        keys = [e.key for e in self.entries]
        if len(set(keys)) != len(keys):
            raise ValueError("manifest entry keys must be unique")
        known = set(keys)
        unknown = sorted({k for p in self.pairs for k in (p.a, p.b)} - known)
        if unknown:
            raise ValueError(f"pairs reference unknown entries: {unknown[:5]}")
        folds = [p.fold for p in self.pairs]
        if any(f is not None for f in folds):
            if any(f is None for f in folds):
                raise ValueError("either every pair has a fold or none does")
            if sorted(set(folds)) != list(range(max(folds) + 1)):
                raise ValueError("fold indices must be contiguous from 0")
        return self

    @classmethod
    def load(cls, path: Path) -> "DatasetManifest":
        try:
            return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise InputError(f"Manifest not found: {path}") from e
        except ValidationError as e:
            raise InputError(f"Invalid manifest {path}: {e}") from e

    def entry(self, key: str) -> ManifestEntry:
        for e in self.entries:
            if e.key == key:
                return e
        raise InputError(f"Unknown manifest entry: {key}")


# ============================================================================
# Reports
# ============================================================================


class EvalReport(BaseModel):
    """Identification and/or verification results. Contains no timings."""

    schema_version: str = Field(default=SCHEMA_VERSION)
    protocol: str = Field(..., description="identification or verification")
    pipeline: Optional[str] = None
    config_hash: Optional[str] = None
    manifest_digest: Optional[str] = None

    # Identification
    n_gallery: Optional[int] = None
    n_probes: Optional[int] = None
    rank_k: Dict[int, float] = Field(default_factory=dict)
    missing_probes: List[str] = Field(default_factory=list)

    # Verification
    n_pairs: Optional[int] = None
    roc: List[Tuple[float, float]] = Field(default_factory=list, description="(FAR, VR) points")
    vr_at_far: Dict[str, float] = Field(default_factory=dict)
    auc: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    fold_accuracies: List[float] = Field(default_factory=list)
    accuracy_mean: Optional[float] = None
    accuracy_se: Optional[float] = None

    @field_validator("rank_k")
    @classmethod
    def _check_rates(cls, v: Dict[int, float]) -> Dict[int, float]:
        if any(not 0.0 <= r <= 1.0 for r in v.values()):
            raise ValueError("identification rates must lie in [0, 1]")
        return v

    @property
    def rank1(self) -> Optional[float]:
        return self.rank_k.get(1)


class EntropyReport(BaseModel):
    """Mean summed joint entropy per grouping mode over a corpus."""

    schema_version: str = Field(default=SCHEMA_VERSION)
    radii: Tuple[float, float]
    interpolation: Interpolation = Interpolation.BILINEAR
    corpus_size: int = Field(..., ge=1)
    per_mode: Dict[int, float]
    modes: Dict[int, Tuple[Tuple[int, ...], Tuple[int, ...]]]
    ranking: List[int] = Field(..., description="Mode ids by decreasing entropy")
    dual_cross_id: int

    @field_validator("per_mode")
    @classmethod
    def _check_modes(cls, v: Dict[int, float]) -> Dict[int, float]:
        if len(v) != 35:
            raise ValueError("per_mode must hold all 35 grouping modes")
        if any(not -1e-9 <= h <= 16.0 + 1e-9 for h in v.values()):
            raise ValueError("summed joint entropy must lie in [0, 16] bits")
        return v

    @property
    def best_mode(self) -> int:
        return self.ranking[0]


class RunArtifact(BaseModel):
    """Provenance of a run: hashes, written outputs and stage timings."""

    schema_version: str = Field(default=SCHEMA_VERSION)
    config_hash: str
    manifest_digest: Optional[str] = None
    seed: int
    outputs: Dict[str, str] = Field(default_factory=dict)
    timings: Dict[str, float] = Field(default_factory=dict, description="Seconds per stage")
