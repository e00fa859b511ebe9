"""
Photometric normalization and the first-derivative-of-Gaussian filter bank.

The TT chain is gamma correction, a Difference of Gaussians, two-stage contrast
equalization and a final rescale to [0, 255]. FDG kernels are directional
derivatives n·∇G of an isotropic Gaussian, mean-subtracted and scaled so that
the response to a unit intensity ramp along n is exactly 1.
"""

import logging
import math
from typing import List, Optional

import numpy as np
from scipy import ndimage

from dcpkit.core.imaging import GrayImage
from dcpkit.models.schemas import FDGBank, TTParams

logger = logging.getLogger(__name__)

BYTE_MAX = 255.0


def rescale_to_byte_range(data: np.ndarray) -> np.ndarray:
    """Affinely map ``data`` onto [0, 255]; a flat input maps to zeros."""
    lo = float(data.min())
    hi = float(data.max())
    if hi <= lo:
        return np.zeros_like(data, dtype=np.float64)
    return (data - lo) * (BYTE_MAX / (hi - lo))


def tt_normalize(img: GrayImage, p: Optional[TTParams] = None) -> GrayImage:
    """
    Apply the TT photometric chain.

    Args:
        img: Input image with intensities in [0, 255]
        p: Chain parameters (defaults: gamma 0.2, sigmas 1.4/2.0, alpha 0.1, tau 10)

    Returns:
        Normalized image rescaled to [0, 255]; a flat input yields a flat output
    """
    p = p or TTParams()
    x = np.power(np.maximum(img.data, 0.0), p.gamma)
    peak = float(x.max())

    dog = ndimage.gaussian_filter(x, p.sigma1, mode="nearest") - ndimage.gaussian_filter(
        x, p.sigma2, mode="nearest"
    )
    # Relative flatness test keeps the chain gain-invariant
    if peak <= 0.0 or float(np.ptp(dog)) <= 1e-12 * peak:
        return GrayImage(np.zeros_like(x))

    y = dog / np.mean(np.abs(dog) ** p.alpha) ** (1.0 / p.alpha)
    y = y / np.mean(np.minimum(p.tau, np.abs(y)) ** p.alpha) ** (1.0 / p.alpha)
    y = p.tau * np.tanh(y / p.tau)
    return GrayImage(rescale_to_byte_range(y))


def fdg_kernel(theta: float, sigma: float = 1.0, radius: Optional[int] = None) -> np.ndarray:
    """
    Build the FDG kernel for direction ``theta``.

    ``kernel[i][j]`` is evaluated at x = j - radius, y = i - radius. The kernel
    sums to zero and responds with exactly 1 to the ramp I(x, y) = x·cosθ + y·sinθ.

    Raises:
        ValueError: If sigma or radius is not positive
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = radius if radius is not None else max(1, math.ceil(3 * sigma))
    if r < 1:
        raise ValueError(f"radius must be at least 1, got {r}")

    coords = np.arange(-r, r + 1, dtype=np.float64)
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    g = np.exp(-(xx**2 + yy**2) / sigma**2)
    dgx = -2.0 * xx / sigma**2 * g
    dgy = -2.0 * yy / sigma**2 * g

    # under convolution the ramp response is -sum(u_x * K(u))
    ramp_gain = -float(np.sum(xx * dgx))

    kernel = math.cos(theta) * dgx + math.sin(theta) * dgy
    kernel = kernel - kernel.mean()
    return kernel / ramp_gain


def fdg_responses(img: GrayImage, bank: Optional[FDGBank] = None) -> List[np.ndarray]:
    """Raw (pre-rescale) convolution responses, one per orientation."""
    bank = bank or FDGBank()
    return [
        ndimage.convolve(img.data, fdg_kernel(theta, bank.sigma, bank.radius), mode="nearest")
        for theta in bank.orientations
    ]


def fdg_filter(img: GrayImage, bank: Optional[FDGBank] = None) -> List[GrayImage]:
    """Filter with every orientation of ``bank`` and rescale each response to [0, 255]."""
    bank = bank or FDGBank()
    outputs = [GrayImage(rescale_to_byte_range(r)) for r in fdg_responses(img, bank)]
    logger.debug(f"FDG filtered {img.width}x{img.height} image at {len(outputs)} orientations")
    return outputs
