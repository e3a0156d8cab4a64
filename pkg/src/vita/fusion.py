"""Conservative fusion of semantic confidence with geometric risk."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense_maps import as_unit_map, check_same_shape

__all__ = ["TraversabilityOutput", "fuse", "total_loss"]


@dataclass
class TraversabilityOutput:
    mean_p: np.ndarray
    confidence: np.ndarray
    slope_risk: np.ndarray
    elevation_risk: np.ndarray
    score: np.ndarray
    variance: np.ndarray
    depth: np.ndarray | None = None

    def maps(self) -> dict[str, np.ndarray]:
        """The six per-pixel outputs keyed by their file stems."""
        return {
            "P": self.mean_p,
            "C": self.confidence,
            "p_var": self.variance,
            "R_slope": self.slope_risk,
            "R_elev": self.elevation_risk,
            "T": self.score,
        }


def fuse(confidence, mean_p, slope, elevation) -> np.ndarray:
    """``T = C * P * (1 - (R_slope + R_elev) / 2)``."""
    c, p, rs, re = (as_unit_map(m) for m in (confidence, mean_p, slope, elevation))
    check_same_shape(c, p, rs, re)
    # Subtract the larger half first so swapping the two risks is bit-exact.
    hi = np.maximum(rs, re)
    lo = np.minimum(rs, re)
    return c * p * (1.0 - hi / 2.0 - lo / 2.0)


def total_loss(sem: float, geo: float, distill: float, lambda_geo: float = 2.0) -> float:
    return sem + lambda_geo * (geo + distill)
