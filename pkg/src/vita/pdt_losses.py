"""Perspective-diversified losses for the three semantic hypotheses.

Each hypothesis (conservative, neutral, aggressive) is trained with its own
focal + Tversky objective. The losses take raw logits and return the scalar
loss together with its gradient with respect to those logits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .dense_maps import as_binary_map, as_dense_map, check_same_shape

__all__ = [
    "PerspectiveConfig",
    "HypothesisSet",
    "TOKEN_NAMES",
    "DEFAULT_PERSPECTIVES",
    "perspectives_from_config",
    "focal_loss",
    "tversky_loss",
    "tversky_from_counts",
    "pdt_loss",
]

TOKEN_NAMES = ("con", "neu", "agg")


@dataclass(frozen=True)
class PerspectiveConfig:
    gamma: float
    alpha_fp: float
    alpha_fn: float
    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not (self.alpha_fp > 0 and self.alpha_fn > 0):
            raise ValueError("alpha_fp and alpha_fn must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


DEFAULT_PERSPECTIVES = (
    PerspectiveConfig(gamma=0.2, alpha_fp=3.0, alpha_fn=0.3),
    PerspectiveConfig(gamma=0.5, alpha_fp=1.0, alpha_fn=1.0),
    PerspectiveConfig(gamma=0.8, alpha_fp=0.3, alpha_fn=3.0),
)


def perspectives_from_config(section: dict) -> tuple[PerspectiveConfig, ...]:
    """Build the three configs from a ``"pdt"`` run-config section."""
    gammas, afp, afn = section["gamma"], section["alpha_fp"], section["alpha_fn"]
    if not len(gammas) == len(afp) == len(afn) == 3:
        raise ValueError("pdt section needs exactly three entries per list")
    return tuple(
        PerspectiveConfig(float(g), float(p), float(n), float(section["epsilon"]))
        for g, p, n in zip(gammas, afp, afn)
    )


@dataclass
class HypothesisSet:
    """Logit maps of the three semantic tokens, in con/neu/agg order."""

    logits: tuple[np.ndarray, np.ndarray, np.ndarray]
    configs: tuple[PerspectiveConfig, ...] = DEFAULT_PERSPECTIVES

    def __post_init__(self):
        if len(self.logits) != 3 or len(self.configs) != 3:
            raise ValueError("a hypothesis set holds exactly three tokens")
        self.logits = tuple(as_dense_map(m) for m in self.logits)
        check_same_shape(*self.logits)


def _prepare(logits, labels) -> tuple[np.ndarray, np.ndarray]:
    z = as_dense_map(logits)
    y = as_binary_map(labels)
    check_same_shape(z, y)
    return z, y


def focal_loss(logits, labels, gamma: float) -> tuple[float, np.ndarray]:
    """Mean focal loss ``-(1 - p_t)^gamma * log(p_t)`` and its logit gradient."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    z, y = _prepare(logits, labels)
    sign = 2.0 * y - 1.0
    sz = sign * z
    log_pt = log_expit(sz)
    pt = expit(sz)
    one_minus = expit(-sz)
    mod = one_minus**gamma
    n = z.size
    loss = float(np.sum(-mod * log_pt) / n)
    grad = sign * mod * (gamma * pt * log_pt - one_minus) / n
    return loss, grad


def tversky_from_counts(tp, fp, fn, alpha_fp, alpha_fn, epsilon=1e-6) -> float:
    return 1.0 - (tp + epsilon) / (tp + alpha_fp * fp + alpha_fn * fn + epsilon)


def tversky_loss(logits, labels, config: PerspectiveConfig) -> tuple[float, np.ndarray]:
    """Tversky loss on soft TP/FP/FN counts of ``sigmoid(logits)``."""
    z, y = _prepare(logits, labels)
    p = expit(z)
    tp = np.sum(p * y)
    fp = np.sum(p * (1.0 - y))
    fn = np.sum((1.0 - p) * y)
    a, b, eps = config.alpha_fp, config.alpha_fn, config.epsilon
    num = tp + eps
    den = tp + a * fp + b * fn + eps
    loss = float(1.0 - num / den)
    # d(den)/dp = y + a(1-y) - b*y ; d(num)/dp = y
    dden = y + a * (1.0 - y) - b * y
    dp = -(y * den - num * dden) / den**2
    return loss, dp * p * (1.0 - p)


def pdt_loss(hypotheses: HypothesisSet, labels) -> tuple[float, list[float], list[np.ndarray]]:
    """Sum of per-token focal + Tversky losses.

    Returns ``(total, per_token_losses, per_token_gradients)``; each gradient
    is with respect to that token's own logits only.
    """
    losses, grads = [], []
    for z, cfg in zip(hypotheses.logits, hypotheses.configs):
        lf, gf = focal_loss(z, labels, cfg.gamma)
        lt, gt = tversky_loss(z, labels, cfg)
        losses.append(lf + lt)
        grads.append(gf + gt)
    return float(sum(losses)), losses, grads
