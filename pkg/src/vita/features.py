"""Fixed per-pixel feature extractor standing in for a learned image encoder.

Channel layout (16 channels, each within [-1, 1]):

====  =======================================
0-2   RGB, mapped to [-1, 1]
3-4   u (column) and v (row), mapped to [-1, 1]
5-7   5x5 local RGB mean, mapped to [-1, 1]
8-10  5x5 local RGB standard deviation, times 2
11    intensity gradient magnitude, times sqrt(2)
12    sine of gradient orientation
13    cosine of gradient orientation
14    constant 1
15    reserved, always 0
====  =======================================
"""
from __future__ import annotations

import numpy as np
from scipy.ndimage import uniform_filter

__all__ = ["FEATURE_DIM", "MIN_IMAGE_SIZE", "extract_features", "flatten_features"]

FEATURE_DIM = 16
MIN_IMAGE_SIZE = 8
WINDOW = 5
# variances below this are treated as exact zeros (filter round-off)
_VAR_FLOOR = 1e-12
_GRAD_FLOOR = 1e-12


def extract_features(image) -> np.ndarray:
    """Return a (16, H, W) feature stack for a (3, H, W) image in [0, 1]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) image, got {img.shape}")
    _, h, w = img.shape
    if h < MIN_IMAGE_SIZE or w < MIN_IMAGE_SIZE:
        raise ValueError(f"image must be at least {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}, got {h}x{w}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains NaN or Inf")

    feats = np.zeros((FEATURE_DIM, h, w))
    feats[0:3] = 2.0 * img - 1.0

    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    feats[3] = 2.0 * u / (w - 1) - 1.0
    feats[4] = 2.0 * v / (h - 1) - 1.0

    for c in range(3):
        mean = uniform_filter(img[c], size=WINDOW, mode="reflect")
        sq = uniform_filter(img[c] * img[c], size=WINDOW, mode="reflect")
        var = sq - mean * mean
        var[var < _VAR_FLOOR] = 0.0
        feats[5 + c] = 2.0 * mean - 1.0
        feats[8 + c] = 2.0 * np.sqrt(var)

    intensity = img.mean(axis=0)
    gv, gu = np.gradient(intensity)
    mag = np.hypot(gu, gv)
    has_grad = mag > _GRAD_FLOOR
    safe = np.where(has_grad, mag, 1.0)
    feats[11] = np.where(has_grad, np.minimum(mag * np.sqrt(2.0), 1.0), 0.0)
    feats[12] = np.where(has_grad, gv / safe, 0.0)
    feats[13] = np.where(has_grad, gu / safe, 0.0)
    feats[14] = 1.0
    return np.clip(feats, -1.0, 1.0)


def flatten_features(features: np.ndarray) -> np.ndarray:
    """(F, H, W) -> (H*W, F) design matrix, row-major pixel order."""
    f = features.shape[0]
    return np.ascontiguousarray(features.reshape(f, -1).T)
