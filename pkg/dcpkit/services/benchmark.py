"""Encoder timing harness and descriptor parameter sweeps on synthetic corpora."""

import logging
import time
from typing import Dict, List, Sequence, Tuple

from dcpkit.core.descriptors import encode_descriptor, regional_histograms
from dcpkit.core.errors import ConfigError
from dcpkit.models.enums import DescriptorKind, Interpolation, PipelineName, Preset
from dcpkit.models.schemas import ExperimentConfig
from dcpkit.services.evaluation import GallerySet, ProbeSet, rank_identities, split_roles
from dcpkit.services.pipelines import DescriptorPipeline, LoadedEntry
from dcpkit.services.synthesis import SyntheticCorpus, noise_image

logger = logging.getLogger(__name__)


def _descriptor_kinds(descriptors: Sequence[DescriptorKind | str]) -> List[DescriptorKind]:
    try:
        return [DescriptorKind(d) for d in descriptors]
    except ValueError as e:
        raise ConfigError(f"Unknown descriptor: {e}") from e


def time_descriptors(
    descriptors: Sequence[DescriptorKind | str],
    size: int = 1000,
    seed: int = 0,
    repeats: int = 3,
    r_in: float = 4.0,
    r_ex: float = 6.0,
    grid_n: int = 8,
    interpolation: Interpolation = Interpolation.BILINEAR,
) -> Dict[str, object]:
    """
    Single-thread wall time of encoding plus grid histogramming on a noise image.

    The best of ``repeats`` runs is kept per descriptor. When both ``dcp`` and
    ``lbp`` are timed the report carries their ratio.
    """
    if size < grid_n:
        raise ConfigError(f"Image size {size} is smaller than the grid {grid_n}")
    kinds = _descriptor_kinds(descriptors)
    img = noise_image(size, seed)
    timings: Dict[str, float] = {}
    for kind in kinds:
        best = float("inf")
        for _ in range(max(1, repeats)):
            start = time.perf_counter()
            cm = encode_descriptor(img, kind, r_in=r_in, r_ex=r_ex, interpolation=interpolation)
            regional_histograms(cm, grid_n)
            best = min(best, time.perf_counter() - start)
        timings[kind.value] = best
        logger.info(f"{kind.value}: {best:.4f}s on {size}x{size}")

    result: Dict[str, object] = {"size": size, "repeats": repeats, "seconds": timings}
    if DescriptorKind.DCP.value in timings and DescriptorKind.LBP.value in timings:
        result["ratio_dcp_lbp"] = timings["dcp"] / timings["lbp"]
    return result


def corpus_entries(corpus: SyntheticCorpus) -> List[LoadedEntry]:
    return [
        LoadedEntry(key=e.key, subject=e.subject, role=e.role, image=img, landmarks=lm)
        for e, img, lm in zip(corpus.manifest.entries, corpus.images, corpus.landmarks)
    ]


def descriptor_rank1(
    config: ExperimentConfig, entries: Sequence[LoadedEntry], threads: int = 1
) -> float:
    """Rank-1 identification of the descriptor pipeline over in-memory entries."""
    _, gallery, probes = split_roles(entries)
    pipeline = DescriptorPipeline(config, threads)
    rank_k, _ = rank_identities(
        pipeline.similarity(probes, gallery),
        GallerySet(tuple(e.key for e in gallery), tuple(e.subject for e in gallery)),
        ProbeSet(tuple(e.key for e in probes), tuple(e.subject for e in probes)),
        k_max=1,
    )
    return rank_k[1]


def parameter_sweep(
    corpus: SyntheticCorpus,
    descriptors: Sequence[DescriptorKind | str] = (DescriptorKind.DCP, DescriptorKind.LBP),
    grid_ns: Sequence[int] = (7, 8, 9, 10),
    radii: Sequence[Tuple[float, float]] = ((2.0, 3.0), (3.0, 5.0), (4.0, 6.0), (5.0, 7.0)),
    base: ExperimentConfig | None = None,
    threads: int = 1,
) -> List[Dict[str, object]]:
    """
    Rank-1 per (descriptor, grid N, R_in, R_ex); LBP-family radii follow R_in.
    """
    base = base or ExperimentConfig.from_preset(Preset.FERET128)
    entries = corpus_entries(corpus)
    rows = []
    for kind in _descriptor_kinds(descriptors):
        for grid_n in grid_ns:
            for r_in, r_ex in radii:
                cfg = base.with_overrides(
                    pipeline=PipelineName.DESCRIPTOR,
                    descriptor=kind,
                    grid_n=grid_n,
                    r_in=r_in,
                    r_ex=r_ex,
                    lbp_radius=None,
                )
                rank1 = descriptor_rank1(cfg, entries, threads)
                row = {"descriptor": kind.value, "grid_n": grid_n, "r_in": r_in, "r_ex": r_ex}
                rows.append({**row, "rank1": rank1})
                logger.info(f"sweep {kind.value} N={grid_n} R=({r_in},{r_ex}): rank-1 {rank1:.4f}")
    return rows
