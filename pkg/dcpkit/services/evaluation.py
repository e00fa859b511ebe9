"""
Identification and verification metrics, horizontal flipping, and the
protocol runner that drives a matching pipeline over a dataset manifest.

Conventions: gallery ties go to the lowest gallery index; a pair is accepted
when its score is ≥ the threshold; VR@FAR reads the ROC point with the largest
FAR not above the target; fold standard error is std(ddof=1)/√folds.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dcpkit.core.errors import DimensionError, InputError, MissingInputsError
from dcpkit.core.imaging import (
    DEFAULT_LAYOUT,
    GrayImage,
    LandmarkLayout,
    LandmarkSet,
    load_landmarks,
    load_pgm,
)
from dcpkit.models.enums import Role
from dcpkit.models.schemas import DatasetManifest, EvalReport, ExperimentConfig, RunArtifact
from dcpkit.services.pipelines import LoadedEntry, build_pipeline
from dcpkit.utils.hashing import hash_file
from dcpkit.utils.logger import LoggerMixin, get_logger, log_stage
from dcpkit.utils.parallel import map_ordered

logger = get_logger(__name__)


class DegenerateEvalError(InputError):
    code = "degenerate_eval"


# ============================================================================
# Protocol Sets
# ============================================================================


@dataclass(frozen=True)
class GallerySet:
    keys: Tuple[str, ...]
    subjects: Tuple[str, ...]

    def __post_init__(self):
        if not self.keys:
            raise InputError("Gallery is empty")
        if len(self.keys) != len(self.subjects):
            raise DimensionError("Gallery keys and subjects differ in length")
        if len(set(self.subjects)) != len(self.subjects):
            raise InputError("Gallery subject ids must be unique")


@dataclass(frozen=True)
class ProbeSet:
    keys: Tuple[str, ...]
    subjects: Tuple[str, ...]

    def __post_init__(self):
        if not self.keys:
            raise InputError("Probe set is empty")
        if len(self.keys) != len(self.subjects):
            raise DimensionError("Probe keys and subjects differ in length")


@dataclass(frozen=True)
class PairList:
    a: Tuple[str, ...]
    b: Tuple[str, ...]
    same: Tuple[bool, ...]
    folds: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if not len(self.a) == len(self.b) == len(self.same):
            raise DimensionError("Pair columns differ in length")
        if self.folds is not None:
            if len(self.folds) != len(self.a):
                raise DimensionError("Need one fold index per pair")
            if sorted(set(self.folds)) != list(range(max(self.folds) + 1)):
                raise InputError("Fold indices must be contiguous from 0")

    def __len__(self) -> int:
        return len(self.a)

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest) -> "PairList":
        pairs = manifest.pairs
        folds = tuple(p.fold for p in pairs) if pairs and pairs[0].fold is not None else None
        return cls(
            a=tuple(p.a for p in pairs),
            b=tuple(p.b for p in pairs),
            same=tuple(p.same for p in pairs),
            folds=folds,
        )


@dataclass(frozen=True)
class Scorer:
    """Pairwise scoring function over feature rows; distances are negated into similarities."""

    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    higher_is_better: bool = True

    def similarity_matrix(self, probes: np.ndarray, gallery: np.ndarray) -> np.ndarray:
        scores = np.asarray(self.fn(probes, gallery), dtype=np.float64)
        return scores if self.higher_is_better else -scores


# ============================================================================
# Identification
# ============================================================================


def rank_identities(
    similarity: np.ndarray,
    gallery: GallerySet,
    probes: ProbeSet,
    k_max: int = 10,
) -> Tuple[Dict[int, float], List[str]]:
    """
    Rank-k rates for k = 1..k_max from a (probes × gallery) similarity matrix.

    Returns:
        (rank_k, missing) where missing lists probe keys whose subject is absent
        from the gallery; they count as misses at every rank
    """
    similarity = np.asarray(similarity, dtype=np.float64)
    if similarity.shape != (len(probes.keys), len(gallery.keys)):
        raise DimensionError(
            f"Similarity shape {similarity.shape} does not match "
            f"{len(probes.keys)} probes x {len(gallery.keys)} gallery"
        )
    position = {s: i for i, s in enumerate(gallery.subjects)}
    ranks = np.full(len(probes.keys), np.iinfo(np.int64).max, dtype=np.int64)
    missing: List[str] = []
    for p, (key, subject) in enumerate(zip(probes.keys, probes.subjects)):
        if subject not in position:
            missing.append(key)
            continue
        order = np.argsort(-similarity[p], kind="stable")
        ranks[p] = int(np.flatnonzero(order == position[subject])[0]) + 1
    n = len(probes.keys)
    rank_k = {k: float(np.sum(ranks <= k)) / n for k in range(1, k_max + 1)}
    return rank_k, missing


def identify(
    gallery: GallerySet,
    probes: ProbeSet,
    gallery_features: np.ndarray,
    probe_features: np.ndarray,
    scorer: Scorer,
    k_max: int = 10,
) -> EvalReport:
    """Closed-set identification of every probe against the gallery."""
    similarity = scorer.similarity_matrix(probe_features, gallery_features)
    rank_k, missing = rank_identities(similarity, gallery, probes, k_max)
    if missing:
        logger.warning(f"{len(missing)} probe(s) have no gallery subject and count as misses")
    return EvalReport(
        protocol="identification",
        n_gallery=len(gallery.keys),
        n_probes=len(probes.keys),
        rank_k=rank_k,
        missing_probes=missing,
    )


# ============================================================================
# Verification
# ============================================================================


def roc_points(labels: np.ndarray, scores: np.ndarray) -> List[Tuple[float, float]]:
    """(FAR, VR) at every distinct threshold, from (0, 0) to (1, 1)."""
    same = scores[labels]
    diff = scores[~labels]
    thresholds = np.unique(scores)[::-1]
    same_sorted = np.sort(same)
    diff_sorted = np.sort(diff)
    vr = (len(same) - np.searchsorted(same_sorted, thresholds, side="left")) / len(same)
    far = (len(diff) - np.searchsorted(diff_sorted, thresholds, side="left")) / len(diff)
    return [(0.0, 0.0)] + [(float(f), float(v)) for f, v in zip(far, vr)]


def auc_from_roc(roc: Sequence[Tuple[float, float]]) -> float:
    far = np.array([p[0] for p in roc])
    vr = np.array([p[1] for p in roc])
    return float(np.sum((far[1:] - far[:-1]) * (vr[1:] + vr[:-1]) / 2.0))


def vr_at_far(roc: Sequence[Tuple[float, float]], target: float) -> float:
    """VR of the ROC point with the largest FAR ≤ target."""
    best = 0.0
    for far, vr in roc:
        if far <= target:
            best = max(best, vr)
    return best


def _best_threshold(labels: np.ndarray, scores: np.ndarray) -> float:
    """Accuracy-maximizing threshold over the distinct scores plus +inf; lowest wins ties."""
    candidates = np.append(np.unique(scores), np.inf)
    same_sorted = np.sort(scores[labels])
    diff_sorted = np.sort(scores[~labels])
    tp = len(same_sorted) - np.searchsorted(same_sorted, candidates, side="left")
    tn = np.searchsorted(diff_sorted, candidates, side="left")
    return float(candidates[int(np.argmax(tp + tn))])


def kfold_accuracy(labels: np.ndarray, scores: np.ndarray, folds: np.ndarray) -> List[float]:
    """Per-fold held-out accuracy with the threshold chosen on the other folds."""
    out = []
    for f in range(int(folds.max()) + 1):
        test = folds == f
        train = ~test
        if not test.any() or not train.any():
            continue
        t = _best_threshold(labels[train], scores[train])
        out.append(float(np.mean((scores[test] >= t) == labels[test])))
    return out


def verify(
    labels: Sequence[bool],
    scores: Sequence[float],
    far_targets: Sequence[float] = (0.001, 0.01),
    folds: Optional[Sequence[int]] = None,
    n_folds: int = 10,
    seed: int = 0,
) -> EvalReport:
    """
    ROC, AUC, VR@FAR and k-fold accuracy of per-pair similarity scores.

    Folds come from ``folds`` or, when absent, from a seeded shuffle into
    ``n_folds`` groups (skipped if there are fewer pairs than folds).

    Raises:
        DegenerateEvalError: If only one label is present or a score is not finite
    """
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise DimensionError("Need one score per labelled pair")
    if not np.all(np.isfinite(scores)):
        raise DegenerateEvalError("Verification scores must be finite")
    if labels.all() or not labels.any():
        raise DegenerateEvalError("Verification needs both same and different pairs")

    roc = roc_points(labels, scores)
    auc = min(max(auc_from_roc(roc), 0.0), 1.0)

    if folds is not None:
        fold_idx = np.asarray(folds, dtype=np.int64)
    elif len(scores) >= n_folds:
        fold_idx = np.random.default_rng(seed).permutation(len(scores)) % n_folds
    else:
        fold_idx = None
    accuracies = kfold_accuracy(labels, scores, fold_idx) if fold_idx is not None else []
    mean = float(np.mean(accuracies)) if accuracies else None
    se = (
        float(np.std(accuracies, ddof=1) / np.sqrt(len(accuracies)))
        if len(accuracies) > 1
        else None
    )

    return EvalReport(
        protocol="verification",
        n_pairs=int(len(scores)),
        roc=roc,
        vr_at_far={f"{t:g}": vr_at_far(roc, t) for t in far_targets},
        auc=auc,
        fold_accuracies=accuracies,
        accuracy_mean=mean,
        accuracy_se=se,
    )


def write_roc_csv(report: EvalReport, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["far", "vr"])
        for far, vr in report.roc:
            writer.writerow([repr(far), repr(vr)])
    return path


# ============================================================================
# Flipping
# ============================================================================


def flip_augment(
    img: GrayImage, landmarks: LandmarkSet, layout: LandmarkLayout = DEFAULT_LAYOUT
) -> Tuple[GrayImage, LandmarkSet]:
    """Horizontal mirror; landmarks are reflected and relabelled left↔right."""
    reflected = landmarks.points.copy()
    reflected[:, 0] = (img.width - 1) - reflected[:, 0]
    return GrayImage(img.data[:, ::-1]), LandmarkSet(reflected[list(layout.mirror)])


# ============================================================================
# Protocol Runner
# ============================================================================


def resolve_inputs(manifest: DatasetManifest, root: Path) -> Dict[str, Tuple[Path, Optional[Path]]]:
    """
    Absolute image and landmark paths per entry key.

    Raises:
        MissingInputsError: Listing every path that does not exist
    """
    resolved = {}
    missing = []
    for e in manifest.entries:
        image = root / e.image
        marks = root / e.landmarks if e.landmarks else None
        for p in (image, marks):
            if p is not None and not p.is_file():
                missing.append(str(p))
        resolved[e.key] = (image, marks)
    if missing:
        raise MissingInputsError(missing)
    return resolved


def load_entries(manifest: DatasetManifest, root: Path, threads: int = 1) -> List[LoadedEntry]:
    paths = resolve_inputs(manifest, root)

    def _load(entry) -> LoadedEntry:
        image_path, marks_path = paths[entry.key]
        return LoadedEntry(
            key=entry.key,
            subject=entry.subject,
            role=entry.role,
            image=load_pgm(image_path),
            landmarks=load_landmarks(marks_path) if marks_path else None,
        )

    return map_ordered(_load, manifest.entries, threads)


def split_roles(
    entries: Sequence[LoadedEntry],
) -> Tuple[List[LoadedEntry], List[LoadedEntry], List[LoadedEntry]]:
    """
    (train, gallery, probes). Without roles the first image per subject is the
    gallery entry and the rest are probes. Training uses ``train`` entries, or
    the gallery when there are none.
    """
    if any(e.role is not None for e in entries):
        gallery = [e for e in entries if e.role == Role.GALLERY]
        probes = [e for e in entries if e.role == Role.PROBE]
        train = [e for e in entries if e.role == Role.TRAIN]
    else:
        seen = set()
        gallery, probes, train = [], [], []
        for e in entries:
            (probes if e.subject in seen else gallery).append(e)
            seen.add(e.subject)
    return (train or gallery), gallery, probes


class ProtocolRunner(LoggerMixin):
    """Runs identification or verification for one manifest and config."""

    def __init__(self, config: ExperimentConfig, threads: int = 1):
        self.config = config
        self.threads = threads
        self.timings: Dict[str, float] = {}

    def _timed(self, stage: str, fn, *args, **kwargs):
        with log_stage(self.logger, stage, self.timings):
            return fn(*args, **kwargs)

    def run(
        self,
        manifest_path: Path,
        protocol: str,
        out_dir: Optional[Path] = None,
        roc_csv: Optional[Path] = None,
    ) -> Tuple[EvalReport, RunArtifact]:
        manifest_path = Path(manifest_path)
        manifest = DatasetManifest.load(manifest_path)
        digest = hash_file(manifest_path)
        cfg = self.config

        entries = self._timed("load", load_entries, manifest, manifest_path.parent, self.threads)
        self.logger.info(f"Loaded {len(entries)} manifest entries from {manifest_path}")
        by_key = {e.key: e for e in entries}
        train, gallery, probes = split_roles(entries)

        pipeline = build_pipeline(cfg, self.threads)
        self._timed("train", pipeline.fit, train)

        if protocol == "identification":
            if not gallery or not probes:
                raise InputError("Identification needs gallery and probe entries")
            similarity = self._timed("score", pipeline.similarity, probes, gallery)
            rank_k, missing = rank_identities(
                similarity,
                GallerySet(tuple(e.key for e in gallery), tuple(e.subject for e in gallery)),
                ProbeSet(tuple(e.key for e in probes), tuple(e.subject for e in probes)),
                cfg.rank_k_max,
            )
            report = EvalReport(
                protocol=protocol,
                n_gallery=len(gallery),
                n_probes=len(probes),
                rank_k=rank_k,
                missing_probes=missing,
            )
        elif protocol == "verification":
            pairs = PairList.from_manifest(manifest)
            if not len(pairs):
                raise InputError(f"Manifest {manifest_path} defines no verification pairs")
            scores = self._timed(
                "score",
                pipeline.pair_scores,
                [by_key[k] for k in pairs.a],
                [by_key[k] for k in pairs.b],
            )
            report = verify(
                pairs.same, scores, cfg.far_targets, pairs.folds, cfg.n_folds, cfg.seed
            )
        else:
            raise InputError(f"Unknown protocol: {protocol}")

        report = report.model_copy(
            update={
                "pipeline": cfg.pipeline.value,
                "config_hash": cfg.config_hash(),
                "manifest_digest": digest,
            }
        )
        self.logger.info(f"{protocol} finished: {self._summary(report)}")

        outputs: Dict[str, str] = {}
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            outputs.update(pipeline.save(out_dir, cfg.config_hash(), cfg.seed))
            report_path = out_dir / "report.json"
            report_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
            outputs["report"] = str(report_path)
        if roc_csv is not None and report.roc:
            outputs["roc_csv"] = str(write_roc_csv(report, roc_csv))

        artifact = RunArtifact(
            config_hash=cfg.config_hash(),
            manifest_digest=digest,
            seed=cfg.seed,
            outputs=outputs,
            timings=self.timings,
        )
        if out_dir is not None:
            (out_dir / "run.json").write_text(artifact.model_dump_json(indent=2), encoding="utf-8")
        return report, artifact

    @staticmethod
    def _summary(report: EvalReport) -> str:
        if report.protocol == "identification":
            return f"rank-1 {report.rank1:.4f} over {report.n_probes} probe(s)"
        return f"AUC {report.auc:.4f} over {report.n_pairs} pair(s)"


def run_protocol(
    manifest_path: Path,
    config: ExperimentConfig,
    protocol: str = "identification",
    out_dir: Optional[Path] = None,
    threads: int = 1,
    roc_csv: Optional[Path] = None,
) -> Tuple[EvalReport, RunArtifact]:
    """
    Evaluate ``config.pipeline`` on a manifest.

    Raises:
        MissingInputsError: If any referenced file is missing
        InputError: If the manifest lacks what the protocol needs
    """
    return ProtocolRunner(config, threads).run(manifest_path, protocol, out_dir, roc_csv)
