"""Image quality metrics on intensities in ``[0, 1]``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionError

C1 = 0.01 ** 2
C2 = 0.03 ** 2
GAUSSIAN = "gaussian"
BLOCK = "block"


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0; ``inf`` for identical inputs."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def _ssim_map(mu_a, mu_b, var_a, var_b, cov):
    num = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    den = (mu_a ** 2 + mu_b ** 2 + C1) * (var_a + var_b + C2)
    return num / den


def _gaussian_kernel(size=11, sigma=1.5):
    r = np.arange(size) - (size - 1) / 2
    k = np.exp(-(r ** 2) / (2 * sigma ** 2))
    return k / k.sum()


def ssim(a, b, window: str = GAUSSIAN) -> float:
    """Mean structural similarity.

    ``window="gaussian"`` slides an 11x11 Gaussian (sigma 1.5) and averages
    over positions where the window fits inside the image; ``window="block"``
    averages over non-overlapping 8x8 blocks.
    """
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise DimensionError(f"ssim expects 2-D images, got shape {a.shape}")
    size = 11 if window == GAUSSIAN else 8
    if min(a.shape) < size:
        raise DimensionError(f"image {a.shape} is smaller than the {size}x{size} window")
    if window == GAUSSIAN:
        k = _gaussian_kernel(size)

        def filt(x):
            return correlate1d(correlate1d(x, k, axis=0, mode="reflect"), k, axis=1, mode="reflect")

        mu_a, mu_b = filt(a), filt(b)
        var_a = filt(a * a) - mu_a ** 2
        var_b = filt(b * b) - mu_b ** 2
        cov = filt(a * b) - mu_a * mu_b
        m = _ssim_map(mu_a, mu_b, var_a, var_b, cov)
        pad = (size - 1) // 2
        return float(m[pad:-pad, pad:-pad].mean())
    if window != BLOCK:
        raise ValueError(f"unknown SSIM window {window!r}")
    hb, wb = a.shape[0] // size, a.shape[1] // size

    def blocks(x):
        return x[: hb * size, : wb * size].reshape(hb, size, wb, size).swapaxes(1, 2).reshape(hb, wb, -1)

    pa, pb = blocks(a), blocks(b)
    mu_a, mu_b = pa.mean(-1), pb.mean(-1)
    var_a, var_b = pa.var(-1), pb.var(-1)
    cov = ((pa - mu_a[..., None]) * (pb - mu_b[..., None])).mean(-1)
    return float(_ssim_map(mu_a, mu_b, var_a, var_b, cov).mean())


def error_map(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    return np.abs(a - b)


@dataclass
class QualityReport:
    psnr: float
    ssim: float
    error_map: np.ndarray


def quality_report(estimate, truth, window: str = GAUSSIAN) -> QualityReport:
    return QualityReport(psnr(estimate, truth), ssim(estimate, truth, window), error_map(estimate, truth))


def video_psnr(estimate, truth) -> float:
    """PSNR over every voxel of two videos."""
    return psnr(estimate, truth)


def video_ssim(estimate, truth, window: str = GAUSSIAN) -> float:
    """Mean per-frame SSIM of two ``(d, h, w)`` videos."""
    est, tru = _pair(estimate, truth)
    return float(np.mean([ssim(e, t, window) for e, t in zip(est, tru)]))
