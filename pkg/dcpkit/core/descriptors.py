"""
Local pattern encoders and grid histogram representations.

Direction k points at angle k·π/4 with y growing downwards. For each direction
the dual-cross sampling reads A_k at radius r_in and B_k at radius r_ex; the
directional code is 2·S(I_A − I_O) + S(I_B − I_A) with S(x) = 1 iff x ≥ 0.
Even directions form DCP-1 and odd directions DCP-2, each a base-4 number over
its four directions. LBP shares the direction layout and the S(0) = 1 rule.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from dcpkit.core.errors import ConfigError, DimensionError
from dcpkit.core.imaging import GrayImage, sample_grid
from dcpkit.models.enums import DescriptorKind, Interpolation

logger = logging.getLogger(__name__)

N_DIRECTIONS = 8
CODES_PER_PLANE = 256
# Direction k becomes MIRROR_DIRECTION[k] under a horizontal flip
MIRROR_DIRECTION = (4, 3, 2, 1, 0, 7, 6, 5)

CHANNELS = {
    DescriptorKind.DCP: 2,
    DescriptorKind.DCP1: 1,
    DescriptorKind.DCP2: 1,
    DescriptorKind.LBP: 1,
    DescriptorKind.MSLBP: 2,
    DescriptorKind.LTP: 2,
}


class GridError(ConfigError):
    code = "grid_error"


def direction_offsets(radius: float) -> np.ndarray:
    """
    (dx, dy) offsets of the eight directions at ``radius``.

    Diagonals are built from one value so that mirrored directions are exact
    negatives of each other; offsets within 1e-9 of an integer are snapped.
    """
    c = radius * math.sqrt(0.5)
    offsets = np.array(
        [
            (radius, 0.0),
            (c, c),
            (0.0, radius),
            (-c, c),
            (-radius, 0.0),
            (-c, -c),
            (0.0, -radius),
            (c, -c),
        ],
        dtype=np.float64,
    )
    snapped = np.round(offsets)
    return np.where(np.abs(offsets - snapped) < 1e-9, snapped, offsets)


@dataclass(frozen=True)
class SamplingGeometry:
    """Dual-cross layout: A_k at r_in and B_k at r_ex along each of the 8 directions."""

    r_in: float = 4.0
    r_ex: float = 6.0
    interpolation: Interpolation = Interpolation.BILINEAR
    offsets_a: np.ndarray = field(init=False, repr=False, compare=False)
    offsets_b: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.r_in < self.r_ex:
            raise ConfigError(f"Require 0 < r_in < r_ex, got r_in={self.r_in}, r_ex={self.r_ex}")
        object.__setattr__(self, "interpolation", Interpolation(self.interpolation))
        for name, radius in (("offsets_a", self.r_in), ("offsets_b", self.r_ex)):
            offsets = direction_offsets(radius)
            offsets.setflags(write=False)
            object.__setattr__(self, name, offsets)

    @property
    def directions(self) -> Tuple[float, ...]:
        return tuple(k * math.pi / 4 for k in range(N_DIRECTIONS))


@dataclass(frozen=True)
class CodeMap:
    """Per-pixel codes of shape (channels, height, width)."""

    codes: np.ndarray
    code_cardinality: int = CODES_PER_PLANE
    descriptor: DescriptorKind = DescriptorKind.DCP

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 3:
            raise DimensionError(f"CodeMap needs (channels, h, w) codes, got {codes.shape}")
        if codes.size and (codes.min() < 0 or codes.max() >= self.code_cardinality):
            raise DimensionError(f"Codes outside [0, {self.code_cardinality})")
        codes = codes.astype(np.uint16, copy=False)
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def channels(self) -> int:
        return self.codes.shape[0]

    @property
    def height(self) -> int:
        return self.codes.shape[1]

    @property
    def width(self) -> int:
        return self.codes.shape[2]

    @property
    def bins_per_region(self) -> int:
        return self.channels * self.code_cardinality

    def select(self, channel: int, descriptor: Optional[DescriptorKind] = None) -> "CodeMap":
        return CodeMap(
            self.codes[channel : channel + 1],
            self.code_cardinality,
            descriptor or self.descriptor,
        )


# ============================================================================
# Encoders
# ============================================================================


def sample_shifted(
    data: np.ndarray, dx: float, dy: float, interpolation: Interpolation
) -> np.ndarray:
    """Sample every pixel at (x + dx, y + dy); equal to per-pixel sampling bit for bit."""
    h, w = data.shape
    if float(dx).is_integer() and float(dy).is_integer():
        cols = np.clip(np.arange(w) + int(dx), 0, w - 1)
        rows = np.clip(np.arange(h) + int(dy), 0, h - 1)
        return data[rows[:, None], cols[None, :]]
    xs = np.arange(w, dtype=np.float64)[None, :] + dx
    ys = np.arange(h, dtype=np.float64)[:, None] + dy
    return sample_grid(data, xs, ys, interpolation)


def dcp_directional_code(i_o: float, i_a: float, i_b: float) -> int:
    """2·S(i_a − i_o) + S(i_b − i_a), S(x) = 1 iff x ≥ 0."""
    return 2 * int(i_a >= i_o) + int(i_b >= i_a)


def directional_codes(img: GrayImage, g: SamplingGeometry) -> np.ndarray:
    """The eight per-direction codes in {0..3}, shape (8, height, width)."""
    data = img.data
    codes = np.empty((N_DIRECTIONS,) + data.shape, dtype=np.uint8)
    for k in range(N_DIRECTIONS):
        a = sample_shifted(data, *g.offsets_a[k], g.interpolation)
        b = sample_shifted(data, *g.offsets_b[k], g.interpolation)
        codes[k] = (a >= data).view(np.uint8) * 2 + (b >= a).view(np.uint8)
    return codes


def pack_base4(digits: np.ndarray) -> np.ndarray:
    """Base-4 number with ``digits[0]`` as the least significant digit."""
    out = np.zeros(digits.shape[1:], dtype=np.uint16)
    for i, d in enumerate(digits):
        out += d.astype(np.uint16) << (2 * i)
    return out


def encode_dcp(img: GrayImage, g: SamplingGeometry) -> CodeMap:
    """Encode both cross planes: channel 0 is DCP-1 (even), channel 1 DCP-2 (odd)."""
    codes = directional_codes(img, g)
    planes = np.stack([pack_base4(codes[0::2]), pack_base4(codes[1::2])])
    return CodeMap(planes, CODES_PER_PLANE, DescriptorKind.DCP)


def unpack_directions(cm: CodeMap) -> np.ndarray:
    """Recover the eight directional codes from a two-channel DCP map."""
    if cm.descriptor != DescriptorKind.DCP or cm.channels != 2:
        raise DimensionError("Direction recovery needs a two-channel DCP map")
    out = np.empty((N_DIRECTIONS, cm.height, cm.width), dtype=np.uint8)
    for i in range(4):
        out[2 * i] = (cm.codes[0] >> (2 * i)) & 3
        out[2 * i + 1] = (cm.codes[1] >> (2 * i)) & 3
    return out


def lbp_codes(data: np.ndarray, radius: float, interpolation: Interpolation) -> np.ndarray:
    out = np.zeros(data.shape, dtype=np.uint16)
    for k, (dx, dy) in enumerate(direction_offsets(radius)):
        nb = sample_shifted(data, dx, dy, interpolation)
        out |= (nb >= data).astype(np.uint16) << k
    return out


def encode_lbp(
    img: GrayImage,
    radius: float,
    neighbors: int = 8,
    interpolation: Interpolation = Interpolation.BILINEAR,
) -> CodeMap:
    """
    Plain 8-neighbour LBP on a circle of ``radius``, all 256 codes kept.

    Raises:
        ConfigError: If neighbors is not 8 or radius is not positive
    """
    if neighbors != N_DIRECTIONS:
        raise ConfigError(f"Only 8-neighbour LBP is supported, got {neighbors}")
    if radius <= 0:
        raise ConfigError(f"LBP radius must be positive, got {radius}")
    codes = lbp_codes(img.data, radius, Interpolation(interpolation))
    return CodeMap(codes[None], CODES_PER_PLANE, DescriptorKind.LBP)


def encode_mslbp(
    img: GrayImage, r1: float, r2: float, interpolation: Interpolation = Interpolation.BILINEAR
) -> CodeMap:
    if not 0 < r1 < r2:
        raise ConfigError(f"MsLBP needs 0 < r1 < r2, got {r1}, {r2}")
    interpolation = Interpolation(interpolation)
    planes = np.stack([lbp_codes(img.data, r, interpolation) for r in (r1, r2)])
    return CodeMap(planes, CODES_PER_PLANE, DescriptorKind.MSLBP)


def encode_ltp(
    img: GrayImage,
    radius: float,
    t: float = 5.0,
    interpolation: Interpolation = Interpolation.BILINEAR,
) -> CodeMap:
    """Ternary patterns split into an upper (diff ≥ t) and a lower (diff ≤ −t) plane."""
    if t < 0:
        raise ConfigError(f"LTP threshold must be nonnegative, got {t}")
    if radius <= 0:
        raise ConfigError(f"LTP radius must be positive, got {radius}")
    data = img.data
    upper = np.zeros(data.shape, dtype=np.uint16)
    lower = np.zeros(data.shape, dtype=np.uint16)
    for k, (dx, dy) in enumerate(direction_offsets(radius)):
        diff = sample_shifted(data, dx, dy, Interpolation(interpolation)) - data
        upper |= (diff >= t).astype(np.uint16) << k
        lower |= (diff <= -t).astype(np.uint16) << k
    return CodeMap(np.stack([upper, lower]), CODES_PER_PLANE, DescriptorKind.LTP)


def encode_descriptor(
    img: GrayImage,
    kind: DescriptorKind,
    *,
    r_in: float = 4.0,
    r_ex: float = 6.0,
    lbp_radius: Optional[float] = None,
    ltp_threshold: float = 5.0,
    interpolation: Interpolation = Interpolation.BILINEAR,
) -> CodeMap:
    """Dispatch to the encoder of ``kind``; LBP-family radii default to r_in (and r_ex)."""
    kind = DescriptorKind(kind)
    radius = lbp_radius if lbp_radius is not None else r_in
    if kind in (DescriptorKind.DCP, DescriptorKind.DCP1, DescriptorKind.DCP2):
        cm = encode_dcp(img, SamplingGeometry(r_in, r_ex, interpolation))
        if kind == DescriptorKind.DCP1:
            return cm.select(0, DescriptorKind.DCP1)
        if kind == DescriptorKind.DCP2:
            return cm.select(1, DescriptorKind.DCP2)
        return cm
    if kind == DescriptorKind.LBP:
        return encode_lbp(img, radius, interpolation=interpolation)
    if kind == DescriptorKind.MSLBP:
        return encode_mslbp(img, radius, r_ex, interpolation)
    return encode_ltp(img, radius, ltp_threshold, interpolation)


# ============================================================================
# Histograms
# ============================================================================


def grid_edges(length: int, n: int) -> List[int]:
    """Cut ``length`` into n floor-sized cells; the last cell absorbs the remainder."""
    cell = length // n
    return [i * cell for i in range(n)] + [length]


@dataclass(frozen=True)
class RegionalHistogramFeature:
    """Concatenated grid histograms, region-major, then channel, then bin."""

    values: np.ndarray
    grid_n: int
    channels: int
    code_cardinality: int
    row_edges: Tuple[int, ...]
    col_edges: Tuple[int, ...]
    descriptor: DescriptorKind = DescriptorKind.DCP
    normalized: bool = False

    @property
    def n_regions(self) -> int:
        return self.grid_n * self.grid_n

    @property
    def region_length(self) -> int:
        return self.channels * self.code_cardinality

    def region(self, index: int) -> np.ndarray:
        start = index * self.region_length
        return self.values[start : start + self.region_length]

    def layout(self) -> dict:
        return {
            "descriptor": self.descriptor.value,
            "grid_n": self.grid_n,
            "channels": self.channels,
            "code_cardinality": self.code_cardinality,
            "order": ["region_row", "region_col", "channel", "bin"],
            "row_edges": list(self.row_edges),
            "col_edges": list(self.col_edges),
            "normalized": self.normalized,
        }


def regional_histograms(
    cm: CodeMap, grid_n: int, normalize: bool = False
) -> RegionalHistogramFeature:
    """
    Histogram codes over a grid_n × grid_n partition of the code map.

    Args:
        cm: Code map
        grid_n: Regions per side, 1 ≤ grid_n ≤ min(width, height)
        normalize: L1-normalize every (region, channel) histogram

    Raises:
        GridError: If grid_n is out of range
    """
    if not 1 <= grid_n <= min(cm.width, cm.height):
        raise GridError(
            f"grid_n must lie in [1, {min(cm.width, cm.height)}] for a "
            f"{cm.width}x{cm.height} map, got {grid_n}"
        )
    row_edges = grid_edges(cm.height, grid_n)
    col_edges = grid_edges(cm.width, grid_n)
    region_row = np.minimum(np.arange(cm.height) // (cm.height // grid_n), grid_n - 1)
    region_col = np.minimum(np.arange(cm.width) // (cm.width // grid_n), grid_n - 1)
    region = region_row[:, None] * grid_n + region_col[None, :]

    card = cm.code_cardinality
    channel = np.arange(cm.channels)[:, None, None]
    index = (region[None] * cm.channels + channel) * card + cm.codes
    total = grid_n * grid_n * cm.channels * card
    counts = np.bincount(index.ravel(), minlength=total)

    values: np.ndarray = counts.astype(np.int64)
    if normalize:
        blocks = values.reshape(-1, card).astype(np.float64)
        values = (blocks / blocks.sum(axis=1, keepdims=True)).ravel()

    return RegionalHistogramFeature(
        values=values,
        grid_n=grid_n,
        channels=cm.channels,
        code_cardinality=card,
        row_edges=tuple(row_edges),
        col_edges=tuple(col_edges),
        descriptor=cm.descriptor,
        normalized=normalize,
    )


def window_histogram(cm: CodeMap, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    """Per-channel histograms over the pixels rows × cols, concatenated channel-major."""
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    window = cm.codes[:, rows[:, None], cols[None, :]]
    offsets = (np.arange(cm.channels) * cm.code_cardinality)[:, None, None]
    return np.bincount((window + offsets).ravel(), minlength=cm.bins_per_region).astype(np.int64)


# ============================================================================
# Histogram Comparison
# ============================================================================


def _pair(h1, h2) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(h1, dtype=np.float64)
    b = np.asarray(h2, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"Histogram lengths differ: {a.shape} vs {b.shape}")
    return a, b


def chi_squared(h1, h2) -> float:
    """Σ (a − b)² / (a + b), with 0/0 terms contributing 0."""
    a, b = _pair(h1, h2)
    s = a + b
    d = a - b
    mask = s > 0
    return float(np.sum(d[mask] ** 2 / s[mask]))


def hist_intersection(h1, h2) -> float:
    a, b = _pair(h1, h2)
    return float(np.sum(np.minimum(a, b)))


def chi_squared_matrix(probes: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """Pairwise χ² distances, shape (n_probes, n_gallery)."""
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    gallery = np.atleast_2d(np.asarray(gallery, dtype=np.float64))
    if probes.shape[1] != gallery.shape[1]:
        raise DimensionError(f"Feature lengths differ: {probes.shape[1]} vs {gallery.shape[1]}")
    out = np.empty((probes.shape[0], gallery.shape[0]))
    for i, p in enumerate(probes):
        s = gallery + p
        d = gallery - p
        terms = np.divide(d * d, s, out=np.zeros_like(s), where=s > 0)
        out[i] = terms.sum(axis=1)
    return out


def intersection_matrix(probes: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    gallery = np.atleast_2d(np.asarray(gallery, dtype=np.float64))
    if probes.shape[1] != gallery.shape[1]:
        raise DimensionError(f"Feature lengths differ: {probes.shape[1]} vs {gallery.shape[1]}")
    return np.stack([np.minimum(gallery, p).sum(axis=1) for p in probes])
