"""
Deterministic synthetic data: correlated Gaussian fields and "face" corpora.

Faces are drawn on the 180×162 MDML canvas: an identity-specific smooth base
pattern plus Gaussian blobs of identity-specific contrast at that identity's
landmark positions. Per-image perturbations are global gain, additive noise and
a small similarity jitter that moves the landmarks with the pixels.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from dcpkit.core.errors import ConfigError
from dcpkit.core.imaging import (
    DEFAULT_LAYOUT,
    MDML_180,
    GeometricNormalization,
    GrayImage,
    LandmarkSet,
    save_landmarks,
    save_pgm,
    warp,
)
from dcpkit.models.enums import GeometryKind, Role, Variation
from dcpkit.models.schemas import DatasetManifest, ManifestEntry, PairEntry

logger = logging.getLogger(__name__)

# Canonical 49-point face on the MDML canvas, (x, y)
# fmt: off
TEMPLATE_LANDMARKS = np.array([
    # brows
    (44, 52), (51, 49), (58, 48), (65, 49), (72, 52),
    (90, 52), (97, 49), (104, 48), (111, 49), (118, 52),
    # nose bridge, lower nose
    (81, 66), (81, 74), (81, 82), (81, 90),
    (71, 96), (76, 98), (81, 99), (86, 98), (91, 96),
    # image-left eye, image-right eye
    (50, 66), (55, 62), (63, 62), (68, 66), (63, 70), (55, 70),
    (94, 66), (99, 62), (107, 62), (112, 66), (107, 70), (99, 70),
    # outer mouth
    (65, 116), (70, 112), (76, 110), (81, 111), (86, 110), (92, 112),
    (97, 116), (92, 121), (86, 123), (81, 124), (76, 123), (70, 121),
    # inner mouth
    (70, 116), (81, 115), (92, 116), (86, 118), (81, 119), (76, 118),
], dtype=np.float64)
# fmt: on

_COMPONENT_GROUPS = (
    DEFAULT_LAYOUT.left_brow,
    DEFAULT_LAYOUT.right_brow,
    tuple(range(10, 14)),
    tuple(range(14, 19)),
    DEFAULT_LAYOUT.left_eye,
    DEFAULT_LAYOUT.right_eye,
    tuple(range(31, 43)),
    tuple(range(43, 49)),
)


def correlated_gaussian_field(
    shape: Tuple[int, int], length_scale: float, rng: np.random.Generator
) -> np.ndarray:
    """
    Zero-mean, unit-variance field with covariance close to exp(−d / length_scale).

    White noise is shaped in the Fourier domain by the 2-D spectrum of the
    exponential covariance, (1 + (2π·ℓ·f)²)^(−3/2); the field is generated on a
    doubled canvas and cropped to weaken the periodic wrap-around.
    """
    if length_scale <= 0:
        raise ConfigError(f"length_scale must be positive, got {length_scale}")
    rows, cols = shape
    big_r, big_c = 2 * rows, 2 * cols
    fy = np.fft.fftfreq(big_r)[:, None]
    fx = np.fft.fftfreq(big_c)[None, :]
    amplitude = (1.0 + (2 * math.pi * length_scale) ** 2 * (fx**2 + fy**2)) ** -0.75
    noise = rng.standard_normal((big_r, big_c))
    field = np.real(np.fft.ifft2(np.fft.fft2(noise) * amplitude))[:rows, :cols]
    field = field - field.mean()
    std = field.std()
    return field / std if std > 0 else field


def gaussian_field_corpus(
    n_images: int, size: int = 128, length_scale: float = 4.0, seed: int = 0
) -> List[GrayImage]:
    """Correlated Gaussian fields mapped affinely into [0, 255] (mean 128, sd 32)."""
    rng = np.random.default_rng(seed)
    images = []
    for _ in range(n_images):
        field = correlated_gaussian_field((size, size), length_scale, rng)
        images.append(GrayImage(np.clip(128.0 + 32.0 * field, 0, 255)))
    return images


def noise_image(size: int, seed: int = 0) -> GrayImage:
    rng = np.random.default_rng(seed)
    return GrayImage(rng.integers(0, 256, size=(size, size)).astype(np.float64))


@dataclass(frozen=True)
class SyntheticCorpus:
    images: List[GrayImage]
    landmarks: List[LandmarkSet]
    manifest: DatasetManifest
    root: Optional[Path] = None


def _identity_face(seed: int, identity: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([seed, identity])
    rows, cols = MDML_180.output_size
    points = TEMPLATE_LANDMARKS + rng.normal(0.0, 1.5, TEMPLATE_LANDMARKS.shape)

    face = 128.0 + 30.0 * correlated_gaussian_field((rows, cols), 6.0, rng)
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)
    for group in _COMPONENT_GROUPS:
        amp = rng.uniform(-70.0, 70.0)
        for idx in group:
            x, y = points[idx]
            face += amp * np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * 3.0**2))
    return np.clip(face, 0.0, 255.0), points


def _pose_jitter(rng: np.random.Generator) -> GeometricNormalization:
    rows, cols = MDML_180.output_size
    angle = math.radians(rng.uniform(-3.0, 3.0))
    scale = rng.uniform(0.97, 1.03)
    shift = rng.uniform(-2.0, 2.0, size=2)
    center = np.array([(cols - 1) / 2, (rows - 1) / 2])
    linear = scale * np.array(
        [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]]
    )
    offset = center - linear @ center + shift
    return GeometricNormalization(
        kind=GeometryKind.SIMILARITY,
        matrix=np.hstack([linear, offset[:, None]]),
        output_size=(rows, cols),
        anchor_targets=(),
    )


def _verification_pairs(
    keys: Sequence[str], subjects: Sequence[str], rng: np.random.Generator, n_folds: int
) -> List[PairEntry]:
    same = [(a, b) for a, b in combinations(range(len(keys)), 2) if subjects[a] == subjects[b]]
    different = [
        (a, b) for a, b in combinations(range(len(keys)), 2) if subjects[a] != subjects[b]
    ]
    if not same or not different:
        return []
    chosen = rng.choice(len(different), size=min(len(same), len(different)), replace=False)
    pairs = [(a, b, True) for a, b in same] + [
        (*different[i], False) for i in sorted(int(i) for i in chosen)
    ]
    folds = rng.permutation(len(pairs)) % n_folds if len(pairs) >= n_folds else None
    return [
        PairEntry(
            a=keys[a], b=keys[b], same=label, fold=None if folds is None else int(folds[i])
        )
        for i, (a, b, label) in enumerate(pairs)
    ]


def synth_corpus(
    seed: int,
    n_ids: int,
    n_per_id: int,
    variation: Iterable[Variation | str] = (),
    out_dir: Optional[Path] = None,
    noise_sigma: float = 3.0,
    gain_range: Tuple[float, float] = (0.7, 1.0),
    n_folds: int = 10,
    n_train_ids: int = 0,
) -> SyntheticCorpus:
    """
    Generate a synthetic face corpus.

    The first image of every identity is its gallery entry, the rest are probes.
    Verification pairs cover every same-identity pair plus an equal number of seeded
    different-identity pairs, split into ``n_folds`` folds.

    Args:
        seed: Global seed
        n_ids: Number of identities (≥ 2)
        n_per_id: Images per identity (≥ 1)
        variation: Any of noise, illumination-ramp, small-pose-jitter; empty or
            ``none`` yields exact duplicates
        out_dir: When given, PGM, landmark and manifest files are written there
        noise_sigma: Standard deviation of additive noise
        gain_range: Range of the global gain factor
        n_train_ids: Extra identities whose images all get the ``train`` role

    Returns:
        Corpus with in-memory images, landmarks and the manifest

    Raises:
        ConfigError: On invalid counts or variation names
    """
    if n_ids < 2 or n_per_id < 1 or n_train_ids < 0:
        raise ConfigError(
            f"Need n_ids >= 2, n_per_id >= 1 and n_train_ids >= 0, "
            f"got {n_ids}, {n_per_id}, {n_train_ids}"
        )
    try:
        variations = {Variation(v) for v in variation} - {Variation.NONE}
    except ValueError as e:
        raise ConfigError(f"Unknown variation: {e}") from e

    images: List[GrayImage] = []
    landmarks: List[LandmarkSet] = []
    entries: List[ManifestEntry] = []
    for identity in range(n_ids + n_train_ids):
        base, points = _identity_face(seed, identity)
        is_train = identity >= n_ids
        subject = f"t{identity - n_ids:03d}" if is_train else f"s{identity:03d}"
        for j in range(n_per_id):
            rng = np.random.default_rng([seed, identity, j, 1])
            data, pts = base, points
            if Variation.SMALL_POSE_JITTER in variations:
                t = _pose_jitter(rng)
                data = warp(GrayImage(data), t).data
                pts = t.apply(pts)
            if Variation.ILLUMINATION_RAMP in variations:
                data = data * rng.uniform(*gain_range)
            if Variation.NOISE in variations:
                data = data + rng.normal(0.0, noise_sigma, data.shape)
            images.append(GrayImage(np.clip(np.rint(data), 0, 255)))
            landmarks.append(LandmarkSet(pts))

            key = f"{subject}_{j:02d}"
            entries.append(
                ManifestEntry(
                    key=key,
                    image=f"images/{key}.pgm",
                    landmarks=f"landmarks/{key}.pts",
                    subject=subject,
                    role=Role.TRAIN if is_train else (Role.GALLERY if j == 0 else Role.PROBE),
                )
            )

    pair_rng = np.random.default_rng([seed, 2])
    evaluated = [e for e in entries if e.role != Role.TRAIN]
    pairs = _verification_pairs(
        [e.key for e in evaluated], [e.subject for e in evaluated], pair_rng, n_folds
    )
    manifest = DatasetManifest(entries=entries, pairs=pairs)

    root = None
    if out_dir is not None:
        root = Path(out_dir)
        for entry, img, lm in zip(entries, images, landmarks):
            save_pgm(img, root / entry.image)
            save_landmarks(lm, root / entry.landmarks)
        (root / "manifest.json").write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"Wrote synthetic corpus of {len(images)} images to {root}")

    return SyntheticCorpus(images=images, landmarks=landmarks, manifest=manifest, root=root)
