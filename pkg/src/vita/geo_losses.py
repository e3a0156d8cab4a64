"""Smooth L1 risk supervision and scale-shift-invariant depth distillation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dense_maps import as_dense_map, check_same_shape

__all__ = [
    "GeoLossWeights",
    "AffineAlignment",
    "SingularAlignmentWarning",
    "smooth_l1",
    "smooth_l1_geo",
    "align_least_squares",
    "ssi_loss",
    "perturb_teacher",
]


@dataclass(frozen=True)
class GeoLossWeights:
    lambda_slope: float = 1.0
    lambda_elev: float = 1.0
    lambda_geo: float = 2.0

    def __post_init__(self):
        if min(self.lambda_slope, self.lambda_elev, self.lambda_geo) < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass(frozen=True)
class AffineAlignment:
    scale: float
    shift: float
    singular: bool = False


class SingularAlignmentWarning(RuntimeWarning):
    pass


def smooth_l1(pred, target) -> tuple[float, np.ndarray]:
    """Mean Huber loss with transition at |e| = 1, and its gradient."""
    e = pred - target
    a = np.abs(e)
    inside = a < 1.0
    per_pixel = np.where(inside, 0.5 * e * e, a - 0.5)
    grad = np.where(inside, e, np.sign(e)) / e.size
    return float(per_pixel.mean()), grad


def smooth_l1_geo(predicted: dict, pseudo: dict, weights: GeoLossWeights = GeoLossWeights()) -> tuple[float, dict]:
    """Weighted Smooth L1 over the ``"slope"`` and ``"elev"`` channels.

    ``predicted`` and ``pseudo`` map channel names to risk maps. Returns the
    weighted loss and gradients with respect to the predicted maps.
    """
    lam = {"slope": weights.lambda_slope, "elev": weights.lambda_elev}
    total = 0.0
    grads = {}
    for name in ("slope", "elev"):
        r = as_dense_map(predicted[name])
        g = as_dense_map(pseudo[name])
        check_same_shape(r, g)
        loss, grad = smooth_l1(r, g)
        total += lam[name] * loss
        grads[name] = lam[name] * grad
    return total, grads


def align_least_squares(predicted_depth, teacher_depth) -> AffineAlignment:
    """Closed-form ``(s, t)`` minimizing ``||s * pred + t - teacher||^2``.

    A constant prediction makes the normal equations singular; then
    ``s = 1`` and ``t`` is the mean difference, with ``singular=True`` and a
    :class:`SingularAlignmentWarning`.
    """
    x = as_dense_map(predicted_depth).ravel()
    y = as_dense_map(teacher_depth).ravel()
    if x.shape != y.shape:
        raise ValueError("predicted and teacher depth differ in shape")
    xm, ym = x.mean(), y.mean()
    xc = x - xm
    sxx = float(xc @ xc)
    # spread below ~1e-10 of the magnitude is indistinguishable from round-off
    if np.sqrt(sxx / x.size) <= 1e-10 * float(np.max(np.abs(x))):
        warnings.warn("constant predicted depth; falling back to shift-only alignment", SingularAlignmentWarning, stacklevel=2)
        return AffineAlignment(1.0, float(ym - xm), singular=True)
    s = float(xc @ (y - ym)) / sxx
    return AffineAlignment(s, float(ym - s * xm))


def ssi_loss(predicted_depth, teacher_depth) -> tuple[float, np.ndarray]:
    """Mean absolute residual after least-squares affine alignment.

    The gradient differentiates through the alignment itself; the L1
    subgradient at a zero residual is taken as 0.
    """
    pred = as_dense_map(predicted_depth)
    teacher = as_dense_map(teacher_depth)
    check_same_shape(pred, teacher)
    fit = align_least_squares(pred, teacher)
    x, y = pred.ravel(), teacher.ravel()
    n = x.size
    r = fit.scale * x + fit.shift - y
    loss = float(np.mean(np.abs(r)))
    sg = np.sign(r)
    if fit.singular:
        # s is pinned to 1, t = mean(y - x): dr_i/dx_j = delta_ij - 1/n
        grad = (sg - sg.sum() / n) / n
        return loss, grad.reshape(pred.shape)
    xc = x - x.mean()
    sxx = xc @ xc
    # ds/dx_j = ((y_j - ybar) - 2 s (x_j - xbar)) / Sxx = (-r_j - s (x_j - xbar)) / Sxx
    ds = (-r - fit.scale * xc) / sxx
    grad = (fit.scale * sg - fit.scale * sg.sum() / n + (sg @ xc) * ds) / n
    return loss, grad.reshape(pred.shape)


def perturb_teacher(depth, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Multiplicative log-normal noise emulating an imperfect depth teacher."""
    d = as_dense_map(depth)
    if sigma <= 0:
        return d
    return d * np.exp(sigma * rng.standard_normal(d.shape))
