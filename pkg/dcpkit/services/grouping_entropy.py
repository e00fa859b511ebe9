"""
Joint-entropy analysis of direction groupings.

The eight sampling directions can be split into two sets of four in 35 ways.
For every split the corpus-mean of H(subset_a) + H(subset_b) is measured, where
H is the empirical joint Shannon entropy (bits) of the four directional codes
over all pixels of an image. The dual-cross split {0,2,4,6} / {1,3,5,7} is the
one the DCP encoders use.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Sequence, Tuple

import numpy as np

from dcpkit.core.descriptors import N_DIRECTIONS, SamplingGeometry, directional_codes
from dcpkit.core.errors import ConfigError, InputError
from dcpkit.core.imaging import GrayImage
from dcpkit.models.enums import Interpolation
from dcpkit.models.schemas import EntropyReport
from dcpkit.utils.parallel import map_ordered

logger = logging.getLogger(__name__)

DUAL_CROSS = ((0, 2, 4, 6), (1, 3, 5, 7))


class EmptyCorpusError(InputError):
    code = "empty_corpus"


@dataclass(frozen=True)
class GroupingMode:
    """Unordered 4+4 split of the directions, stored with 0 in ``subset_a``."""

    subset_a: Tuple[int, ...]
    subset_b: Tuple[int, ...]
    canonical_id: int

    @property
    def is_dual_cross(self) -> bool:
        return (self.subset_a, self.subset_b) == DUAL_CROSS


def canonicalize(subset_a: Sequence[int], subset_b: Sequence[int]) -> Tuple[Tuple[int, ...], ...]:
    """Sorted subsets ordered so that direction 0 is in the first one."""
    a = tuple(sorted(subset_a))
    b = tuple(sorted(subset_b))
    if len(a) != 4 or len(b) != 4 or set(a) | set(b) != set(range(N_DIRECTIONS)):
        raise ConfigError(f"Not a 4+4 partition of the directions: {a} / {b}")
    return (a, b) if 0 in a else (b, a)


def enumerate_groupings() -> List[GroupingMode]:
    """All 35 canonical splits in lexicographic order of ``subset_a``."""
    modes = []
    for rest in combinations(range(1, N_DIRECTIONS), 3):
        a = (0,) + rest
        b = tuple(d for d in range(N_DIRECTIONS) if d not in a)
        modes.append(GroupingMode(a, b, len(modes)))
    return modes


def mode_id(subset_a: Sequence[int], subset_b: Sequence[int]) -> int:
    key = canonicalize(subset_a, subset_b)
    for mode in enumerate_groupings():
        if (mode.subset_a, mode.subset_b) == key:
            return mode.canonical_id
    raise ConfigError(f"Unknown grouping {key}")


def shannon_entropy(counts: np.ndarray) -> float:
    """Entropy in bits of a count vector, with 0·log 0 = 0."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log2(p))) + 0.0


def subset_entropy(codes: np.ndarray, subset: Sequence[int]) -> float:
    """Joint entropy of the 4⁴ tuples of directional codes of ``subset``."""
    index = np.zeros(codes.shape[1:], dtype=np.intp)
    for j, d in enumerate(subset):
        index += codes[d].astype(np.intp) << (2 * j)
    return shannon_entropy(np.bincount(index.ravel(), minlength=4 ** len(subset)))


def joint_entropy(img: GrayImage, g: SamplingGeometry, subset: Sequence[int]) -> float:
    """Joint Shannon entropy (bits) of the directional codes of ``subset`` over ``img``."""
    if len(subset) != 4 or len(set(subset)) != 4 or not set(subset) <= set(range(N_DIRECTIONS)):
        raise ConfigError(f"Subset must hold 4 distinct directions, got {subset}")
    return subset_entropy(directional_codes(img, g), subset)


def _image_mode_entropies(img: GrayImage, g: SamplingGeometry) -> np.ndarray:
    codes = directional_codes(img, g)
    cache: Dict[Tuple[int, ...], float] = {}
    out = []
    for mode in enumerate_groupings():
        for subset in (mode.subset_a, mode.subset_b):
            if subset not in cache:
                cache[subset] = subset_entropy(codes, subset)
        out.append(cache[mode.subset_a] + cache[mode.subset_b])
    return np.array(out)


def entropy_scan(
    corpus: Sequence[GrayImage], g: SamplingGeometry, threads: int = 1
) -> EntropyReport:
    """
    Mean summed joint entropy of every grouping mode over ``corpus``.

    Per-image values are computed independently and averaged in corpus order,
    so the report does not depend on ``threads``.

    Raises:
        EmptyCorpusError: If the corpus is empty
    """
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpusError("Entropy scan needs at least one image")

    per_image = map_ordered(lambda img: _image_mode_entropies(img, g), corpus, threads)
    means = np.mean(np.stack(per_image), axis=0)

    modes = enumerate_groupings()
    # stable sort: ties keep the lower mode id first
    ranking = [int(i) for i in np.argsort(-means, kind="stable")]
    dual_id = next(m.canonical_id for m in modes if m.is_dual_cross)
    logger.info(
        f"Entropy scan over {len(corpus)} image(s) at radii ({g.r_in}, {g.r_ex}): "
        f"best mode {ranking[0]}, dual-cross rank {ranking.index(dual_id) + 1}"
    )
    return EntropyReport(
        radii=(g.r_in, g.r_ex),
        interpolation=g.interpolation,
        corpus_size=len(corpus),
        per_mode={m.canonical_id: float(means[m.canonical_id]) for m in modes},
        modes={m.canonical_id: (m.subset_a, m.subset_b) for m in modes},
        ranking=ranking,
        dual_cross_id=dual_id,
    )


def radius_sweep(
    corpus: Sequence[GrayImage],
    radii: Sequence[Tuple[float, float]],
    threads: int = 1,
    interpolation: Interpolation = Interpolation.BILINEAR,
) -> List[EntropyReport]:
    """One entropy scan per (r_in, r_ex) pair, in the given order."""
    return [
        entropy_scan(corpus, SamplingGeometry(r_in, r_ex, interpolation), threads)
        for r_in, r_ex in radii
    ]
