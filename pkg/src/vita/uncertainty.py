"""Inter-token variance of the hypothesis masks and the confidence weight it implies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .pdt_losses import HypothesisSet

__all__ = ["UncertaintyOutput", "mean_and_variance", "confidence_from_variance", "estimate_uncertainty"]

DEFAULT_ALPHA = 0.7
# Small enough that C at the max-variance pixel is within 1e-6 of 1 - alpha
# for any variance map whose maximum exceeds ~1e-3.
DEFAULT_EPSILON = 1e-9


@dataclass
class UncertaintyOutput:
    mean_p: np.ndarray
    variance: np.ndarray
    confidence: np.ndarray
    alpha: float = DEFAULT_ALPHA
    epsilon: float = DEFAULT_EPSILON


def mean_and_variance(hypotheses: HypothesisSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel mean and population variance of the sigmoided masks."""
    probs = [expit(z) for z in hypotheses.logits]
    n = len(probs)
    mean = sum(probs) / n
    # Pairwise form of the population variance: exactly zero iff all tokens agree.
    var = np.zeros_like(mean)
    for i in range(n):
        for j in range(i + 1, n):
            var += (probs[i] - probs[j]) ** 2
    return mean, var / n**2


def confidence_from_variance(variance, alpha: float = DEFAULT_ALPHA, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """``C = 1 - alpha * var / (max(var) + eps)``, normalized per image."""
    var = np.asarray(variance, dtype=np.float64)
    if np.any(var < 0):
        raise ValueError("variance must be nonnegative")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    normalized = var / (var.max() + epsilon)
    return 1.0 - alpha * normalized


def estimate_uncertainty(hypotheses: HypothesisSet, alpha: float = DEFAULT_ALPHA, epsilon: float = DEFAULT_EPSILON) -> UncertaintyOutput:
    mean, var = mean_and_variance(hypotheses)
    conf = confidence_from_variance(var, alpha, epsilon)
    return UncertaintyOutput(mean, var, conf, alpha, epsilon)
