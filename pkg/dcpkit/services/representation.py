"""
MD-DCPs blocks and the nine MDML feature vectors.

An MD-DCPs block is the concatenation, over the FDG orientation images, of the
two-channel DCP histogram of one image region. Holistic features (H1, H2) tile
a crop of the similarity-normalized face with a 9×9 grid; landmark features
(H3, C1–C6) tile a 40×40 patch around each selected landmark of the
affine-normalized face with a 4×4 grid. All vectors are square roots of the
raw concatenated counts.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from dcpkit.core.descriptors import (
    CODES_PER_PLANE,
    CodeMap,
    SamplingGeometry,
    encode_dcp,
    regional_histograms,
    window_histogram,
)
from dcpkit.core.errors import ConfigError, InputError
from dcpkit.core.filtering import fdg_filter, tt_normalize
from dcpkit.core.imaging import (
    DEFAULT_LAYOUT,
    MDML_180,
    N_LANDMARKS,
    GrayImage,
    LandmarkLayout,
    LandmarkSet,
    normalize_to_preset,
)
from dcpkit.models.enums import FeatureName, GeometryKind, Interpolation
from dcpkit.models.schemas import ExperimentConfig, FDGBank, TTParams
from dcpkit.utils.parallel import map_ordered

logger = logging.getLogger(__name__)

DCP_BINS = 2 * CODES_PER_PLANE
UNFILTERED = "unfiltered"


class GeometryError(InputError):
    """Input image is not on the canvas a feature expects."""

    code = "geometry_error"


class MdDcpsConfig(BaseModel):
    """Filter bank, DCP sampling geometry and the photometric step feeding MD-DCPs."""

    model_config = ConfigDict(frozen=True)

    bank: FDGBank = Field(default_factory=FDGBank)
    r_in: float = Field(default=2.0, gt=0)
    r_ex: float = Field(default=3.0, gt=0)
    interpolation: Interpolation = Interpolation.BILINEAR
    include_unfiltered: bool = False
    photometric: bool = True
    tt: TTParams = Field(default_factory=TTParams)

    @model_validator(mode="after")
    def _check_radii(self) -> "MdDcpsConfig":
        if not self.r_in < self.r_ex:
            raise ValueError("r_in must be smaller than r_ex")
        return self

    @property
    def geometry(self) -> SamplingGeometry:
        return SamplingGeometry(self.r_in, self.r_ex, self.interpolation)

    @property
    def block_labels(self) -> List[str]:
        labels = [f"{theta:.6f}" for theta in self.bank.orientations]
        return labels + [UNFILTERED] if self.include_unfiltered else labels

    @property
    def block_length(self) -> int:
        """Bins of one region: 512 per orientation image."""
        return len(self.block_labels) * DCP_BINS

    @classmethod
    def from_experiment(cls, cfg: ExperimentConfig) -> "MdDcpsConfig":
        return cls(
            bank=cfg.fdg,
            r_in=cfg.r_in,
            r_ex=cfg.r_ex,
            interpolation=cfg.interpolation,
            include_unfiltered=cfg.include_unfiltered,
            photometric=cfg.photometric,
            tt=cfg.tt,
        )


# Landmark counts per component feature
EXPECTED_COUNTS: Dict[FeatureName, int] = {
    FeatureName.H3: 21,
    FeatureName.C1: 10,
    FeatureName.C2: 12,
    FeatureName.C3: 11,
    FeatureName.C4: 11,
    FeatureName.C5: 9,
    FeatureName.C6: 18,
}


@dataclass(frozen=True)
class ComponentSpec:
    name: FeatureName
    landmark_indices: Tuple[int, ...]
    patch_size: int = 40
    patch_grid: int = 4

    def __post_init__(self):
        idx = tuple(int(i) for i in self.landmark_indices)
        if not idx or len(set(idx)) != len(idx):
            raise ConfigError(f"{self.name}: landmark indices must be distinct and nonempty")
        if any(not 0 <= i < N_LANDMARKS for i in idx):
            raise ConfigError(f"{self.name}: landmark indices must lie in 0..{N_LANDMARKS - 1}")
        expected = EXPECTED_COUNTS.get(FeatureName(self.name))
        if expected is not None and len(idx) != expected:
            raise ConfigError(f"{self.name} needs {expected} landmarks, got {len(idx)}")
        if not 1 <= self.patch_grid <= self.patch_size:
            raise ConfigError(f"patch_grid must lie in [1, {self.patch_size}]")
        object.__setattr__(self, "name", FeatureName(self.name))
        object.__setattr__(self, "landmark_indices", idx)

    def feature_length(self, block_length: int) -> int:
        return len(self.landmark_indices) * self.patch_grid**2 * block_length


def default_components(
    patch_size: int = 40, patch_grid: int = 4, layout: LandmarkLayout = DEFAULT_LAYOUT
) -> Dict[FeatureName, ComponentSpec]:
    """Landmark selections of H3 and C1–C6 on the 49-point layout."""
    brows = layout.left_brow + layout.right_brow
    eyes = layout.left_eye + layout.right_eye
    h3 = (
        tuple(brows[i] for i in (0, 2, 4, 5, 7, 9))
        + tuple(eyes[i] for i in (0, 3, 6, 9))
        + tuple(layout.nose[i] for i in (0, 3, 4, 6, 8))
        + tuple(layout.mouth[i] for i in (0, 3, 6, 9, 12, 15))
    )
    table = {
        FeatureName.H3: h3,
        FeatureName.C1: brows,
        FeatureName.C2: eyes,
        FeatureName.C3: layout.left_brow + layout.left_eye,
        FeatureName.C4: layout.right_brow + layout.right_eye,
        FeatureName.C5: layout.nose,
        FeatureName.C6: layout.mouth,
    }
    return {
        name: ComponentSpec(name, idx, patch_size, patch_grid) for name, idx in table.items()
    }


@dataclass(frozen=True)
class Rect:
    """Inclusive pixel rectangle on a canvas."""

    top: int
    left: int
    bottom: int
    right: int

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    @property
    def width(self) -> int:
        return self.right - self.left + 1

    def contains(self, other: "Rect") -> bool:
        return (
            self.top <= other.top
            and self.left <= other.left
            and other.bottom <= self.bottom
            and other.right <= self.right
        )

    def rows(self) -> np.ndarray:
        return np.arange(self.top, self.bottom + 1)

    def cols(self) -> np.ndarray:
        return np.arange(self.left, self.right + 1)


HOLISTIC_CROPS: Dict[FeatureName, Rect] = {
    FeatureName.H1: Rect(33, 27, 154, 136),
    FeatureName.H2: Rect(36, 41, 140, 122),
}


@dataclass(frozen=True)
class FeatureVector:
    name: FeatureName
    values: np.ndarray
    layout: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise ValueError(f"{self.name}: feature values must be a finite vector")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


# ============================================================================
# MD-DCPs
# ============================================================================


def encode_orientations(img: GrayImage, cfg: MdDcpsConfig) -> List[CodeMap]:
    """DCP code maps of every block image (FDG orientations, then optionally the input)."""
    base = tt_normalize(img, cfg.tt) if cfg.photometric else img
    g = cfg.geometry
    maps = [encode_dcp(filtered, g) for filtered in fdg_filter(base, cfg.bank)]
    if cfg.include_unfiltered:
        maps.append(encode_dcp(base, g))
    return maps


def _region_block(code_maps: Sequence[CodeMap], rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return np.concatenate([window_histogram(cm, rows, cols) for cm in code_maps])


def _tiled_blocks(
    code_maps: Sequence[CodeMap], rows: np.ndarray, cols: np.ndarray, n: int
) -> np.ndarray:
    """Region-major MD-DCPs of an n×n tiling of the window rows × cols."""
    per_map = []
    for cm in code_maps:
        codes = cm.codes[:, rows[:, None], cols[None, :]]
        window = CodeMap(codes, cm.code_cardinality, cm.descriptor)
        per_map.append(regional_histograms(window, n).values.reshape(n * n, -1))
    return np.stack(per_map, axis=1).ravel()


def md_dcps_region(img: GrayImage, cfg: MdDcpsConfig, region: Rect) -> np.ndarray:
    """
    MD-DCPs block of one region: orientation-major concatenation of 2-channel
    DCP histograms, ``cfg.block_length`` raw counts.

    Raises:
        GeometryError: If the region is not inside the image
    """
    if not Rect(0, 0, img.height - 1, img.width - 1).contains(region):
        raise GeometryError(f"Region {region} exceeds the {img.width}x{img.height} image")
    return _region_block(encode_orientations(img, cfg), region.rows(), region.cols())


def _check_canvas(img: GrayImage, name: FeatureName) -> None:
    if img.shape != MDML_180.output_size:
        raise GeometryError(
            f"{name.value} needs a {MDML_180.output_size[1]}x{MDML_180.output_size[0]} "
            f"canvas, got {img.width}x{img.height}"
        )


def _sqrt_feature(
    name: FeatureName, counts: np.ndarray, expected: int, layout: dict
) -> FeatureVector:
    if counts.shape[0] != expected:
        raise AssertionError(f"{name.value} length {counts.shape[0]} != expected {expected}")
    return FeatureVector(name, np.sqrt(counts.astype(np.float64)), layout)


# ============================================================================
# Holistic and Landmark Features
# ============================================================================


def holistic_from_maps(
    code_maps: Sequence[CodeMap], which: FeatureName, cfg: MdDcpsConfig, grid_n: int = 9
) -> FeatureVector:
    crop = HOLISTIC_CROPS[which]
    counts = _tiled_blocks(code_maps, crop.rows(), crop.cols(), grid_n)
    layout = {
        "kind": "holistic",
        "crop": [crop.top, crop.left, crop.bottom, crop.right],
        "grid_n": grid_n,
        "blocks": cfg.block_labels,
        "order": ["region_row", "region_col", "block", "channel", "bin"],
    }
    return _sqrt_feature(which, counts, grid_n * grid_n * cfg.block_length, layout)


def build_holistic(
    img_similarity: GrayImage, which: FeatureName, cfg: MdDcpsConfig, grid_n: int = 9
) -> FeatureVector:
    """
    H1 or H2 from the similarity-normalized 180×162 face.

    Raises:
        GeometryError: If the image is not on the MDML canvas
        ConfigError: If ``which`` is not a holistic feature
    """
    which = FeatureName(which)
    if which not in HOLISTIC_CROPS:
        raise ConfigError(f"{which.value} is not a holistic feature")
    _check_canvas(img_similarity, which)
    return holistic_from_maps(encode_orientations(img_similarity, cfg), which, cfg, grid_n)


def patch_indices(
    center: Tuple[float, float], size: int, rows: int, cols: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the size×size patch at ``center``, clipped to the image."""
    x, y = center
    top = int(np.floor(y + 0.5)) - size // 2
    left = int(np.floor(x + 0.5)) - size // 2
    return (
        np.clip(np.arange(top, top + size), 0, rows - 1),
        np.clip(np.arange(left, left + size), 0, cols - 1),
    )


def landmark_from_maps(
    code_maps: Sequence[CodeMap],
    landmarks: LandmarkSet,
    component: ComponentSpec,
    cfg: MdDcpsConfig,
) -> FeatureVector:
    if len(landmarks.points) <= max(component.landmark_indices):
        raise ConfigError(
            f"{component.name.value} selects landmark {max(component.landmark_indices)} "
            f"but only {len(landmarks.points)} are given"
        )
    height, width = code_maps[0].height, code_maps[0].width
    counts = np.concatenate(
        [
            _tiled_blocks(
                code_maps,
                *patch_indices(landmarks.points[i], component.patch_size, height, width),
                component.patch_grid,
            )
            for i in component.landmark_indices
        ]
    )
    layout = {
        "kind": "landmark",
        "landmarks": list(component.landmark_indices),
        "patch_size": component.patch_size,
        "patch_grid": component.patch_grid,
        "blocks": cfg.block_labels,
        "order": ["landmark", "cell_row", "cell_col", "block", "channel", "bin"],
    }
    expected = component.feature_length(cfg.block_length)
    return _sqrt_feature(component.name, counts, expected, layout)


def build_landmark_feature(
    img_affine: GrayImage,
    landmarks: LandmarkSet,
    component: ComponentSpec,
    cfg: MdDcpsConfig,
) -> FeatureVector:
    """
    Patch feature around the landmarks of ``component`` on the affine-normalized face.

    Raises:
        ConfigError: If the component selects landmarks the set does not have
    """
    return landmark_from_maps(encode_orientations(img_affine, cfg), landmarks, component, cfg)


@dataclass(frozen=True)
class EncodedFace:
    """Code maps of both normalized canvases plus landmarks in the affine frame."""

    similarity_maps: List[CodeMap]
    affine_maps: List[CodeMap]
    affine_landmarks: LandmarkSet


def encode_face(
    img_raw: GrayImage,
    landmarks_raw: LandmarkSet,
    cfg: MdDcpsConfig,
    layout: LandmarkLayout = DEFAULT_LAYOUT,
) -> EncodedFace:
    """Normalize onto both MDML canvases and encode each once."""
    sim_img, _ = normalize_to_preset(
        img_raw, landmarks_raw, MDML_180, GeometryKind.SIMILARITY, layout
    )
    aff_img, aff_landmarks = normalize_to_preset(
        img_raw, landmarks_raw, MDML_180, GeometryKind.AFFINE, layout
    )
    return EncodedFace(
        similarity_maps=encode_orientations(sim_img, cfg),
        affine_maps=encode_orientations(aff_img, cfg),
        affine_landmarks=aff_landmarks,
    )


def feature_from_face(
    face: EncodedFace,
    name: FeatureName,
    cfg: MdDcpsConfig,
    components: Optional[Dict[FeatureName, ComponentSpec]] = None,
    holistic_grid: int = 9,
) -> FeatureVector:
    name = FeatureName(name)
    if name in HOLISTIC_CROPS:
        return holistic_from_maps(face.similarity_maps, name, cfg, holistic_grid)
    components = components or default_components()
    return landmark_from_maps(face.affine_maps, face.affine_landmarks, components[name], cfg)


def build_mdml(
    img_raw: GrayImage,
    landmarks_raw: LandmarkSet,
    cfg: MdDcpsConfig,
    components: Optional[Dict[FeatureName, ComponentSpec]] = None,
    holistic_grid: int = 9,
    threads: int = 1,
) -> Dict[FeatureName, FeatureVector]:
    """
    All nine MDML feature vectors of one face, keyed in H1..C6 order.

    Raises:
        DegenerateLandmarksError: If either normalization cannot be solved
    """
    face = encode_face(img_raw, landmarks_raw, cfg)
    components = components or default_components()
    names = list(FeatureName)
    vectors = map_ordered(
        lambda n: feature_from_face(face, n, cfg, components, holistic_grid), names, threads
    )
    logger.debug(f"Built MDML features, total length {sum(len(v) for v in vectors)}")
    return dict(zip(names, vectors))
