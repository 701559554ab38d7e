"""Image-quality metrics."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.signal import convolve2d

from .errors import InvalidInputError, ShapeError


@dataclass(frozen=True)
class SsimConfig:
    """SSIM settings.

    ``window=None`` picks 11 for images at least 11 pixels on each side and
    otherwise the largest odd size not exceeding the shorter side, capped at
    7.  ``window_sigma=None`` scales 1.5 by ``window / 11``.
    """

    window: int | None = None
    window_sigma: float | None = None
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def resolve(self, shape):
        side = min(shape)
        window = self.window
        if window is None:
            if side >= 11:
                window = 11
            else:
                window = min(7, side if side % 2 else side - 1)
        if window < 1 or window % 2 == 0:
            raise InvalidInputError(f"SSIM window must be odd and positive, got {window}")
        if window > side:
            raise InvalidInputError(f"SSIM window {window} exceeds image side {side}")
        sigma = self.window_sigma if self.window_sigma is not None else 1.5 * window / 11
        if not (self.k1 > 0 and self.k2 > 0 and self.dynamic_range > 0 and sigma > 0):
            raise InvalidInputError("k1, k2, dynamic_range and window_sigma must be positive")
        return window, sigma


def _gaussian_kernel(window, sigma):
    r = np.arange(window) - (window - 1) / 2
    g = np.exp(-0.5 * (r / sigma) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def _check_pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def ssim_components(a, b, cfg=SsimConfig()):
    """Luminance and contrast-structure maps whose product is the SSIM map."""
    a, b = _check_pair(a, b)
    if a.ndim != 2:
        raise ShapeError("SSIM expects 2-D images")
    window, sigma = cfg.resolve(a.shape)
    w = _gaussian_kernel(window, sigma)

    def filt(img):
        return convolve2d(img, w, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    luminance = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    contrast_structure = (2 * cov + c2) / (var_a + var_b + c2)
    return luminance, contrast_structure


def ssim_map(a, b, cfg=SsimConfig()):
    """Local SSIM index at every fully contained window position."""
    luminance, contrast_structure = ssim_components(a, b, cfg)
    return luminance * contrast_structure


def ssim(a, b, cfg=SsimConfig()):
    """Mean Gaussian-windowed structural similarity of two images."""
    return float(np.mean(ssim_map(a, b, cfg)))


def rmse(a, b):
    a, b = _check_pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(a, b, dynamic_range=1.0):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    err = rmse(a, b)
    if err == 0:
        return math.inf
    return 20.0 * math.log10(dynamic_range / err)
