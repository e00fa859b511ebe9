"""
Grayscale rasters, subpixel sampling and landmark-driven geometric normalization.

Coordinates follow the (x, y) = (column, row) convention throughout; canvas sizes
are (rows, cols). Every out-of-range access clamps to the nearest border pixel,
which is the same as replicate padding for both sampling rules.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np

from dcpkit.core.errors import ConfigError, InputError
from dcpkit.models.enums import GeometryKind, Interpolation

logger = logging.getLogger(__name__)

N_LANDMARKS = 49
PGM_MAXVAL = 255

Point = Tuple[float, float]


class PgmFormatError(InputError):
    code = "pgm_format_error"


class UnsupportedPgmError(InputError):
    code = "pgm_unsupported"


class LandmarkFormatError(InputError):
    code = "landmark_format_error"


class DegenerateLandmarksError(InputError):
    code = "degenerate_landmarks"


# ============================================================================
# Containers
# ============================================================================


@dataclass(frozen=True)
class GrayImage:
    """Immutable float64 raster of shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InputError(f"Image must be a nonempty 2-D raster, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InputError("Image contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    def map(self, fn) -> "GrayImage":
        """Apply a pointwise function and wrap the result."""
        return GrayImage(fn(self.data))


@dataclass(frozen=True)
class LandmarkSet:
    """The 49 facial points as an immutable (49, 2) array of (x, y)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.shape != (N_LANDMARKS, 2):
            raise LandmarkFormatError(
                f"Expected {N_LANDMARKS} (x, y) landmarks, got array of shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise LandmarkFormatError("Landmarks contain non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def centroid(self, indices: Sequence[int]) -> Point:
        sel = self.points[list(indices)]
        return float(sel[:, 0].mean()), float(sel[:, 1].mean())


@dataclass(frozen=True)
class GeometricNormalization:
    """
    Forward transform from the source image to a canonical canvas.

    ``matrix`` is 2×3 and maps homogeneous source points (x, y, 1) to canvas
    points; warping samples the source through its inverse.
    """

    kind: GeometryKind
    matrix: np.ndarray
    output_size: Tuple[int, int]
    anchor_targets: Tuple[Point, ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, copy=True)
        if m.shape != (2, 3) or not np.all(np.isfinite(m)):
            raise DegenerateLandmarksError("Transform must be a finite 2x3 matrix")
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) <= 1e-9:
            raise DegenerateLandmarksError(f"Transform is not invertible (det={det:.3e})")
        if self.kind == GeometryKind.SIMILARITY:
            if abs(m[0, 0] - m[1, 1]) > 1e-9 or abs(m[0, 1] + m[1, 0]) > 1e-9:
                raise DegenerateLandmarksError("Similarity transform must be a scaled rotation")
        rows, cols = self.output_size
        if rows < 1 or cols < 1:
            raise InputError(f"Invalid output size {self.output_size}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "output_size", (int(rows), int(cols)))

    @property
    def scale(self) -> float:
        """Uniform scale of a similarity transform."""
        return float(math.hypot(self.matrix[0, 0], self.matrix[1, 0]))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map an (n, 2) array of source points into the canvas frame."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    def inverse_matrix(self) -> np.ndarray:
        linear = np.linalg.inv(self.matrix[:, :2])
        return np.hstack([linear, (-linear @ self.matrix[:, 2])[:, None]])


@dataclass(frozen=True)
class CanvasPreset:
    """Named canonical geometry: canvas size plus anchor targets in (x, y)."""

    name: str
    output_size: Tuple[int, int]
    eye_left: Point
    eye_right: Point
    mouth: Point | None = None
    description: str = field(default="", compare=False)


# Anchor coordinates are published as (row, col); stored here as (x, y).
DESCRIPTOR_128 = CanvasPreset(
    name="feret128",
    output_size=(128, 128),
    eye_left=(31.0, 34.0),
    eye_right=(98.0, 34.0),
    description="Descriptor benchmark canvas",
)
MDML_180 = CanvasPreset(
    name="mdml180",
    output_size=(180, 162),
    eye_left=(59.0, 66.0),
    eye_right=(103.0, 66.0),
    mouth=(81.0, 116.0),
    description="MDML canvas shared by both normalizations",
)
GEOMETRY_PRESETS = {p.name: p for p in (DESCRIPTOR_128, MDML_180)}


@dataclass(frozen=True)
class LandmarkLayout:
    """
    Index groups of the 49-point layout.

    Brows 0-9, nose bridge 10-13, lower nose 14-18, image-left eye 19-24,
    image-right eye 25-30, outer mouth 31-42, inner mouth 43-48. ``mirror``
    gives, for each index, the index it becomes after a horizontal flip.
    """

    left_brow: Tuple[int, ...] = (0, 1, 2, 3, 4)
    right_brow: Tuple[int, ...] = (5, 6, 7, 8, 9)
    nose: Tuple[int, ...] = tuple(range(10, 19))
    left_eye: Tuple[int, ...] = tuple(range(19, 25))
    right_eye: Tuple[int, ...] = tuple(range(25, 31))
    mouth: Tuple[int, ...] = tuple(range(31, 49))
    # fmt: off
    mirror: Tuple[int, ...] = (
        # brows
        9, 8, 7, 6, 5, 4, 3, 2, 1, 0,
        # nose bridge, lower nose
        10, 11, 12, 13, 18, 17, 16, 15, 14,
        # eyes: outer corner, upper pair, inner corner, lower pair
        28, 27, 26, 25, 30, 29,
        22, 21, 20, 19, 24, 23,
        # outer mouth from the left corner clockwise
        37, 36, 35, 34, 33, 32, 31, 42, 41, 40, 39, 38,
        # inner mouth
        45, 44, 43, 48, 47, 46,
    )
    # fmt: on

    def __post_init__(self):
        if sorted(self.mirror) != list(range(N_LANDMARKS)):
            raise ConfigError("Landmark mirror table must be a permutation of 0..48")
        if any(self.mirror[self.mirror[i]] != i for i in range(N_LANDMARKS)):
            raise ConfigError("Landmark mirror table must be an involution")


DEFAULT_LAYOUT = LandmarkLayout()


def get_geometry_preset(name: str) -> CanvasPreset:
    try:
        return GEOMETRY_PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"Unknown geometry preset '{name}'. Available: {sorted(GEOMETRY_PRESETS)}"
        ) from None


# ============================================================================
# Sampling
# ============================================================================


def sample_grid(
    data: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    interpolation: Interpolation = Interpolation.BILINEAR,
) -> np.ndarray:
    """
    Sample ``data`` at broadcastable coordinate arrays with border clamping.

    Scalar and array inputs run through the same arithmetic, so a vectorized
    caller and a per-pixel caller get bit-identical values.
    """
    h, w = data.shape
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1)

    if interpolation == Interpolation.NEAREST:
        xi = np.minimum(np.floor(xs + 0.5), w - 1).astype(np.intp)
        yi = np.minimum(np.floor(ys + 0.5), h - 1).astype(np.intp)
        return data[yi, xi]

    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0
    x0i = x0.astype(np.intp)
    y0i = y0.astype(np.intp)
    x1i = np.minimum(x0i + 1, w - 1)
    y1i = np.minimum(y0i + 1, h - 1)

    # lerp form a + t*(b - a) is exact on flat neighbourhoods
    top = data[y0i, x0i] + fx * (data[y0i, x1i] - data[y0i, x0i])
    bottom = data[y1i, x0i] + fx * (data[y1i, x1i] - data[y1i, x0i])
    return top + fy * (bottom - top)


def sample_bilinear(img: GrayImage, x: float, y: float) -> float:
    """Bilinear intensity at subpixel (x, y), clamped to the raster."""
    return float(sample_grid(img.data, np.float64(x), np.float64(y), Interpolation.BILINEAR))


def sample_nearest(img: GrayImage, x: float, y: float) -> float:
    return float(sample_grid(img.data, np.float64(x), np.float64(y), Interpolation.NEAREST))


# ============================================================================
# Geometric Normalization
# ============================================================================


def solve_similarity(
    eye_left: Point,
    eye_right: Point,
    targets: Tuple[Point, Point],
    output_size: Tuple[int, int],
) -> GeometricNormalization:
    """
    Solve the rotation + uniform scale + translation mapping both eyes onto targets.

    Args:
        eye_left: Source left eye center (x, y)
        eye_right: Source right eye center (x, y)
        targets: Canvas positions for the two eyes
        output_size: Canvas (rows, cols)

    Returns:
        Similarity normalization

    Raises:
        DegenerateLandmarksError: If the eyes coincide
    """
    p1 = complex(*eye_left)
    p2 = complex(*eye_right)
    q1 = complex(*targets[0])
    q2 = complex(*targets[1])
    if abs(p2 - p1) < 1e-12:
        raise DegenerateLandmarksError("Eye centers coincide; similarity transform undefined")
    if abs(q2 - q1) < 1e-12:
        raise DegenerateLandmarksError("Eye targets coincide; similarity transform undefined")

    # z -> a*z + b in the complex plane is exactly a similarity
    a = (q2 - q1) / (p2 - p1)
    b = q1 - a * p1
    matrix = np.array([[a.real, -a.imag, b.real], [a.imag, a.real, b.imag]])
    return GeometricNormalization(
        kind=GeometryKind.SIMILARITY,
        matrix=matrix,
        output_size=output_size,
        anchor_targets=(tuple(targets[0]), tuple(targets[1])),
    )


def solve_affine(
    eye_left: Point,
    eye_right: Point,
    mouth: Point,
    targets: Tuple[Point, Point, Point],
    output_size: Tuple[int, int],
) -> GeometricNormalization:
    """Solve the unique affine transform taking (eyes, mouth) onto three targets."""
    src = np.array([eye_left, eye_right, mouth], dtype=np.float64)
    dst = np.array(targets, dtype=np.float64)
    if dst.shape != (3, 2):
        raise DegenerateLandmarksError("Affine normalization needs three target points")

    def _area(pts: np.ndarray) -> float:
        d1 = pts[1] - pts[0]
        d2 = pts[2] - pts[0]
        return float(d1[0] * d2[1] - d1[1] * d2[0])

    extent = max(1.0, float(np.ptp(src, axis=0).max()))
    if abs(_area(src)) <= 1e-9 * extent * extent:
        raise DegenerateLandmarksError("Eye and mouth points are collinear")
    if abs(_area(dst)) <= 1e-9:
        raise DegenerateLandmarksError("Affine targets are collinear")

    system = np.hstack([src, np.ones((3, 1))])
    solution = np.linalg.solve(system, dst)
    return GeometricNormalization(
        kind=GeometryKind.AFFINE,
        matrix=solution.T,
        output_size=output_size,
        anchor_targets=tuple(tuple(t) for t in dst.tolist()),
    )


def warp(
    img: GrayImage,
    t: GeometricNormalization,
    interpolation: Interpolation = Interpolation.BILINEAR,
) -> GrayImage:
    """Resample ``img`` onto the canvas of ``t`` by inverse mapping."""
    rows, cols = t.output_size
    inv = t.inverse_matrix()
    gx, gy = np.meshgrid(
        np.arange(cols, dtype=np.float64), np.arange(rows, dtype=np.float64), indexing="xy"
    )
    src_x = inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]
    src_y = inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]
    return GrayImage(sample_grid(img.data, src_x, src_y, interpolation))


def solve_for_preset(
    landmarks: LandmarkSet,
    preset: CanvasPreset,
    kind: GeometryKind,
    layout: LandmarkLayout = DEFAULT_LAYOUT,
) -> GeometricNormalization:
    """Solve the normalization of ``kind`` from eye/mouth centroids onto a preset canvas."""
    eye_l = landmarks.centroid(layout.left_eye)
    eye_r = landmarks.centroid(layout.right_eye)
    if kind == GeometryKind.SIMILARITY:
        t = solve_similarity(eye_l, eye_r, (preset.eye_left, preset.eye_right), preset.output_size)
    else:
        if preset.mouth is None:
            raise DegenerateLandmarksError(f"Preset {preset.name} has no mouth anchor")
        mouth = landmarks.centroid(layout.mouth)
        t = solve_affine(
            eye_l,
            eye_r,
            mouth,
            (preset.eye_left, preset.eye_right, preset.mouth),
            preset.output_size,
        )
    return t


def normalize_to_preset(
    img: GrayImage,
    landmarks: LandmarkSet,
    preset: CanvasPreset,
    kind: GeometryKind,
    layout: LandmarkLayout = DEFAULT_LAYOUT,
) -> Tuple[GrayImage, LandmarkSet]:
    """Warp an image and its landmarks onto a named canvas."""
    t = solve_for_preset(landmarks, preset, kind, layout)
    return warp(img, t), LandmarkSet(t.apply(landmarks.points))


# ============================================================================
# File I/O
# ============================================================================


def _pgm_header(raw: bytes) -> Tuple[int, int, int, int]:
    """Parse a P5 header; returns (width, height, maxval, raster offset)."""
    pos = 0
    tokens = []

    def _skip_space(p: int) -> int:
        while p < len(raw):
            c = raw[p : p + 1]
            if c == b"#":
                while p < len(raw) and raw[p : p + 1] not in (b"\n", b"\r"):
                    p += 1
            elif c.isspace():
                p += 1
            else:
                break
        return p

    while len(tokens) < 4:
        pos = _skip_space(pos)
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PgmFormatError("Truncated PGM header")
        tokens.append(raw[start:pos])

    if tokens[0] != b"P5":
        raise PgmFormatError(f"Not a binary PGM (magic {tokens[0][:8]!r})")
    try:
        width, height, maxval = (int(tok) for tok in tokens[1:])
    except ValueError as e:
        raise PgmFormatError(f"Malformed PGM header: {e}") from e
    if width < 1 or height < 1:
        raise PgmFormatError(f"Invalid PGM size {width}x{height}")
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise PgmFormatError("Missing whitespace after PGM maxval")
    return width, height, maxval, pos + 1


def load_pgm(path: Path) -> GrayImage:
    """
    Read a binary 8-bit P5 PGM.

    Raises:
        PgmFormatError: Malformed or truncated file
        UnsupportedPgmError: maxval other than 255
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError as e:
        raise InputError(f"Image not found: {path}") from e
    if not raw:
        raise PgmFormatError(f"Empty PGM file: {path}")

    width, height, maxval, offset = _pgm_header(raw)
    if maxval != PGM_MAXVAL:
        raise UnsupportedPgmError(f"Only maxval {PGM_MAXVAL} is supported, got {maxval}")
    expected = width * height
    raster = raw[offset : offset + expected]
    if len(raster) != expected:
        raise PgmFormatError(f"PGM raster truncated: {len(raster)} of {expected} bytes")

    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    logger.debug(f"Loaded {path.name}: {width}x{height}")
    return GrayImage(pixels.astype(np.float64))


def to_uint8(img: GrayImage) -> np.ndarray:
    """Round and clip intensities to the 8-bit range."""
    return np.clip(np.rint(img.data), 0, PGM_MAXVAL).astype(np.uint8)


def save_pgm(img: GrayImage, path: Path) -> Path:
    """Write ``img`` as P5 with the canonical ``P5\\n<w> <h>\\n255\\n`` header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n{img.width} {img.height}\n{PGM_MAXVAL}\n".encode("ascii")
    path.write_bytes(header + to_uint8(img).tobytes())
    return path


def load_landmarks(path: Path) -> LandmarkSet:
    """Read 49 lines of ``x y``; blank lines and ``#`` comments are ignored."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise InputError(f"Landmark file not found: {path}") from e

    points = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise LandmarkFormatError(f"{path}:{lineno}: expected 'x y', got {line!r}")
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError as e:
            raise LandmarkFormatError(f"{path}:{lineno}: {e}") from e
    if len(points) != N_LANDMARKS:
        raise LandmarkFormatError(f"{path}: expected {N_LANDMARKS} points, found {len(points)}")
    return LandmarkSet(np.array(points))


def save_landmarks(landmarks: LandmarkSet, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{x:.17g} {y:.17g}" for x, y in landmarks.points]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
