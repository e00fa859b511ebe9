"""
Matching pipelines registered by name.

``descriptor``: geometric (and optional photometric) normalization, one local
pattern descriptor, grid histograms, χ² or intersection matching.

``mdml-wpca`` / ``mdml-plda`` / ``mdml``: the nine MDML feature vectors, one
PCA per feature, then whitened cosine or PLDA log-likelihood ratios, fused
across features. ``mdml`` picks PLDA when the training set has a repeated
identity and WPCA otherwise.
"""

from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from dcpkit.core.descriptors import (
    chi_squared_matrix,
    encode_descriptor,
    intersection_matrix,
    regional_histograms,
)
from dcpkit.core.errors import DimensionError, InputError
from dcpkit.core.filtering import tt_normalize
from dcpkit.core.imaging import (
    DESCRIPTOR_128,
    MDML_180,
    GrayImage,
    LandmarkSet,
    normalize_to_preset,
)
from dcpkit.models.enums import (
    FeatureName,
    FusionMode,
    GeometryKind,
    HistogramMetric,
    PipelineName,
    Preset,
    Role,
)
from dcpkit.models.schemas import ExperimentConfig
from dcpkit.services.learning import (
    FusionModel,
    PcaModel,
    PldaModel,
    cosine_matrix,
    cosine_pairs,
    fusion_fit,
    fusion_score,
    pca_fit,
    pca_project,
    plda_fit,
    plda_llr_matrix,
    plda_llr_pairs,
    wpca_project,
)
from dcpkit.services.representation import (
    EncodedFace,
    MdDcpsConfig,
    default_components,
    encode_face,
    feature_from_face,
)
from dcpkit.utils.file_handlers import BlockContainer, save_artifact
from dcpkit.utils.logger import LoggerMixin
from dcpkit.utils.parallel import map_ordered


@dataclass(frozen=True)
class LoadedEntry:
    key: str
    subject: str
    role: Optional[Role]
    image: GrayImage
    landmarks: Optional[LandmarkSet]


def _pending(entries: Sequence[LoadedEntry], cache: Dict[str, object]) -> List[LoadedEntry]:
    """Entries not yet in ``cache``, one per key, in first-seen order."""
    unique = {e.key: e for e in entries}
    return [e for e in unique.values() if e.key not in cache]


class MatchingPipeline(LoggerMixin, ABC):
    """Fit on training entries, then score probe/gallery grids or pair lists.

    Scores are similarities: higher means more alike.
    """

    name: PipelineName

    def __init__(self, config: ExperimentConfig, threads: int = 1):
        self.config = config
        self.threads = threads

    @abstractmethod
    def fit(self, train: Sequence[LoadedEntry]) -> None: ...

    @abstractmethod
    def similarity(
        self, probes: Sequence[LoadedEntry], gallery: Sequence[LoadedEntry]
    ) -> np.ndarray: ...

    @abstractmethod
    def pair_scores(self, a: Sequence[LoadedEntry], b: Sequence[LoadedEntry]) -> np.ndarray: ...

    @abstractmethod
    def save(self, out_dir: Path, config_hash: str, seed: int) -> Dict[str, str]:
        """Write features and models; returns output name → path."""


# ============================================================================
# Descriptor Pipeline
# ============================================================================


def _rowwise_chi2(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    s = A + B
    d = A - B
    return np.divide(d * d, s, out=np.zeros_like(s), where=s > 0).sum(axis=1)


class DescriptorPipeline(MatchingPipeline):
    name = PipelineName.DESCRIPTOR

    def __init__(self, config: ExperimentConfig, threads: int = 1):
        super().__init__(config, threads)
        self._features: Dict[str, np.ndarray] = {}

    def prepare(self, entry: LoadedEntry) -> GrayImage:
        """Canvas image of an entry: eye-aligned when landmarks exist, then TT if enabled."""
        img = entry.image
        if entry.landmarks is not None:
            canvas = DESCRIPTOR_128 if self.config.preset == Preset.FERET128 else MDML_180
            img, _ = normalize_to_preset(img, entry.landmarks, canvas, GeometryKind.SIMILARITY)
        return tt_normalize(img, self.config.tt) if self.config.photometric else img

    def describe(self, img: GrayImage) -> np.ndarray:
        cfg = self.config
        cm = encode_descriptor(
            img,
            cfg.descriptor,
            r_in=cfg.r_in,
            r_ex=cfg.r_ex,
            lbp_radius=cfg.lbp_radius,
            ltp_threshold=cfg.ltp_threshold,
            interpolation=cfg.interpolation,
        )
        hist = regional_histograms(cm, cfg.grid_n, cfg.histogram_normalize)
        return hist.values.astype(np.float64)

    def _matrix(self, entries: Sequence[LoadedEntry]) -> np.ndarray:
        todo = _pending(entries, self._features)
        described = map_ordered(lambda e: self.describe(self.prepare(e)), todo, self.threads)
        for e, f in zip(todo, described):
            self._features[e.key] = f
        return np.stack([self._features[e.key] for e in entries])

    def fit(self, train: Sequence[LoadedEntry]) -> None:
        self.logger.debug("Descriptor pipeline has nothing to train")

    def similarity(self, probes, gallery) -> np.ndarray:
        P = self._matrix(probes)
        G = self._matrix(gallery)
        if self.config.metric == HistogramMetric.CHI2:
            return -chi_squared_matrix(P, G)
        return intersection_matrix(P, G)

    def pair_scores(self, a, b) -> np.ndarray:
        A = self._matrix(a)
        B = self._matrix(b)
        if self.config.metric == HistogramMetric.CHI2:
            return -_rowwise_chi2(A, B)
        return np.minimum(A, B).sum(axis=1)

    def save(self, out_dir: Path, config_hash: str, seed: int) -> Dict[str, str]:
        keys = sorted(self._features)
        path = save_artifact(
            BlockContainer(
                blocks={k: self._features[k] for k in keys},
                header={"descriptor": self.config.descriptor.value, "grid_n": self.config.grid_n},
            ),
            Path(out_dir) / "features.feat",
            config_hash=config_hash,
            seed=seed,
        )
        return {"features": str(path)}


# ============================================================================
# MDML Pipelines
# ============================================================================


class MdmlPipeline(MatchingPipeline):
    """Per-feature PCA, whitened-cosine or PLDA scoring, and score fusion."""

    def __init__(self, config: ExperimentConfig, threads: int = 1, classifier: str = "auto"):
        super().__init__(config, threads)
        self.classifier = classifier
        self.name = {
            "wpca": PipelineName.MDML_WPCA,
            "plda": PipelineName.MDML_PLDA,
        }.get(classifier, PipelineName.MDML_AUTO)
        self.md_config = MdDcpsConfig.from_experiment(config)
        self.components = default_components(config.patch_size, config.patch_grid)
        self._faces: Dict[str, EncodedFace] = {}
        self._projections: Dict[FeatureName, Dict[str, np.ndarray]] = {f: {} for f in FeatureName}
        self.pca: Dict[FeatureName, PcaModel] = {}
        self.plda: Dict[FeatureName, PldaModel] = {}
        self.fusion: Optional[FusionModel] = None

    @property
    def uses_plda(self) -> bool:
        return bool(self.plda)

    def _encode(self, entries: Sequence[LoadedEntry]) -> None:
        todo = _pending(entries, self._faces)
        for e in todo:
            if e.landmarks is None:
                raise InputError(f"MDML pipelines need landmarks; entry {e.key} has none")
        faces = map_ordered(
            lambda e: encode_face(e.image, e.landmarks, self.md_config), todo, self.threads
        )
        self._faces.update({e.key: f for e, f in zip(todo, faces)})

    def feature_matrix(self, entries: Sequence[LoadedEntry], name: FeatureName) -> np.ndarray:
        """Raw feature rows of ``name`` for ``entries``, float32 to bound memory."""
        self._encode(entries)
        rows = map_ordered(
            lambda e: feature_from_face(
                self._faces[e.key], name, self.md_config, self.components, self.config.holistic_grid
            ).values.astype(np.float32),
            entries,
            self.threads,
        )
        return np.stack(rows)

    def _project(self, entries: Sequence[LoadedEntry], name: FeatureName) -> np.ndarray:
        cache = self._projections[name]
        todo = _pending(entries, cache)
        if todo:
            X = self.feature_matrix(todo, name)
            project = pca_project if name in self.plda else wpca_project
            Y = project(self.pca[name], X)
            cache.update({e.key: y for e, y in zip(todo, Y)})
        return np.stack([cache[e.key] for e in entries])

    def _feature_scores(
        self, name: FeatureName, A: np.ndarray, B: np.ndarray, paired: bool
    ) -> np.ndarray:
        if name in self.plda:
            m = self.plda[name]
            return plda_llr_pairs(m, A, B) if paired else plda_llr_matrix(m, A, B)
        return cosine_pairs(A, B) if paired else cosine_matrix(A, B)

    def _choose_plda(self, train: Sequence[LoadedEntry]) -> bool:
        counts = Counter(e.subject for e in train)
        repeated = len(counts) >= 2 and max(counts.values()) >= 2
        if self.classifier == "plda":
            return True
        if self.classifier == "wpca":
            return False
        self.logger.info(f"Classifier choice: {'PLDA' if repeated else 'WPCA'}")
        return repeated

    def fit(self, train: Sequence[LoadedEntry]) -> None:
        cfg = self.config
        if len(train) < 2:
            raise DimensionError(f"MDML training needs at least 2 entries, got {len(train)}")
        use_plda = self._choose_plda(train)
        labels = [e.subject for e in train]

        for name in FeatureName:
            X = self.feature_matrix(train, name)
            k = min(cfg.pca_dim, X.shape[0] - 1, X.shape[1])
            self.pca[name] = pca_fit(X, k, truncate_to_rank=True)
            k = self.pca[name].d_out
            if use_plda:
                Y = pca_project(self.pca[name], X)
                self.plda[name] = plda_fit(
                    Y, labels, min(cfg.plda_dh, k), min(cfg.plda_dw, k), cfg.plda_iters, cfg.seed
                )
                self._projections[name].update({e.key: y for e, y in zip(train, Y)})
            else:
                self._projections[name].update(
                    {e.key: y for e, y in zip(train, wpca_project(self.pca[name], X))}
                )
            self.logger.info(f"{name.value}: dim {X.shape[1]} -> {k}")

        if cfg.fusion == FusionMode.LINEAR:
            ia, ib = np.triu_indices(len(train), k=1)
            a = [train[i] for i in ia]
            b = [train[i] for i in ib]
            same = [train[i].subject == train[j].subject for i, j in zip(ia, ib)]
            scores = self._score_stack(a, b, paired=True)
            self.fusion = fusion_fit(scores, same, cfg.fusion_c, FusionMode.LINEAR)
        else:
            self.fusion = fusion_fit(np.empty((0, len(FeatureName))), [], mode=FusionMode.AVERAGE)

    def _score_stack(self, a, b, paired: bool) -> np.ndarray:
        per_feature = [
            self._feature_scores(name, self._project(a, name), self._project(b, name), paired)
            for name in FeatureName
        ]
        return np.stack(per_feature, axis=-1)

    def similarity(self, probes, gallery) -> np.ndarray:
        return fusion_score(self.fusion, self._score_stack(probes, gallery, paired=False))

    def pair_scores(self, a, b) -> np.ndarray:
        return fusion_score(self.fusion, self._score_stack(a, b, paired=True))

    def save(self, out_dir: Path, config_hash: str, seed: int) -> Dict[str, str]:
        out_dir = Path(out_dir)
        models = out_dir / "models"
        stamp = {"config_hash": config_hash, "seed": seed}
        outputs: Dict[str, str] = {}
        for name in FeatureName:
            path = save_artifact(self.pca[name], models / f"{name.value}_pca.model", **stamp)
            outputs[f"pca_{name.value}"] = str(path)
            if name in self.plda:
                path = save_artifact(self.plda[name], models / f"{name.value}_plda.model", **stamp)
                outputs[f"plda_{name.value}"] = str(path)
        outputs["fusion"] = str(save_artifact(self.fusion, models / "fusion.model", **stamp))
        keys = sorted(self._projections[FeatureName.H1])
        blocks = {}
        for name in FeatureName:
            blocks[name.value] = np.stack([self._projections[name][k] for k in keys])
        outputs["features"] = str(
            save_artifact(
                BlockContainer(blocks=blocks, header={"keys": keys, "projected": True}),
                out_dir / "features.mdml",
                config_hash=config_hash,
                seed=seed,
            )
        )
        return outputs


_REGISTRY = {
    PipelineName.DESCRIPTOR: lambda cfg, threads: DescriptorPipeline(cfg, threads),
    PipelineName.MDML_WPCA: lambda cfg, threads: MdmlPipeline(cfg, threads, "wpca"),
    PipelineName.MDML_PLDA: lambda cfg, threads: MdmlPipeline(cfg, threads, "plda"),
    PipelineName.MDML_AUTO: lambda cfg, threads: MdmlPipeline(cfg, threads, "auto"),
}


def build_pipeline(config: ExperimentConfig, threads: int = 1) -> MatchingPipeline:
    return _REGISTRY[PipelineName(config.pipeline)](config, threads)
