"""Geometric pseudo-labels from a relative depth map.

Points live in an intrinsics-free pseudo-3D space ``x = (u, v, D)`` where ``u``
is the column index, ``v`` the row index and ``D`` the relative depth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense_maps import as_binary_map, as_dense_map, check_same_shape

__all__ = [
    "GeometryError",
    "InsufficientPointsError",
    "DegeneratePlaneError",
    "GroundPlane",
    "PseudoRiskLabels",
    "pseudo_points",
    "surface_normals",
    "fit_ground_plane",
    "slope_risk",
    "elevation_risk",
    "height_to_risk",
    "pseudo_risk_labels",
]

DEFAULT_BETA = 3.0
_RANK_TOL = 1e-10
_TIE_TOL = 1e-9


class GeometryError(ValueError):
    pass


class InsufficientPointsError(GeometryError):
    pass


class DegeneratePlaneError(GeometryError):
    pass


@dataclass(frozen=True)
class GroundPlane:
    normal: np.ndarray
    offset: float

    def signed_height(self, depth: np.ndarray) -> np.ndarray:
        """``x . n - b`` at every pixel of ``depth``."""
        pts = pseudo_points(depth)
        return pts @ self.normal - self.offset


@dataclass
class PseudoRiskLabels:
    slope: np.ndarray
    elevation: np.ndarray
    beta: float = DEFAULT_BETA
    plane: GroundPlane | None = None


def pseudo_points(depth: np.ndarray) -> np.ndarray:
    """(H, W, 3) array of ``(u, v, D)`` coordinates."""
    h, w = depth.shape
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    return np.stack([u, v, depth], axis=-1)


def surface_normals(depth) -> np.ndarray:
    """Unit normals ``normalize(-dD/du, -dD/dv, 1)`` as a (3, H, W) array.

    Central differences with a one-pixel step; border pixels copy the nearest
    interior normal.
    """
    d = as_dense_map(depth)
    if d.shape[0] < 3 or d.shape[1] < 3:
        raise GeometryError(f"surface normals need at least 3x3 pixels, got {d.shape}")
    if np.any(d <= 0):
        raise GeometryError("depth must be positive")
    du = (d[1:-1, 2:] - d[1:-1, :-2]) / 2.0
    dv = (d[2:, 1:-1] - d[:-2, 1:-1]) / 2.0
    n = np.stack([-du, -dv, np.ones_like(du)])
    n /= np.sqrt(np.sum(n * n, axis=0))
    return np.pad(n, ((0, 0), (1, 1), (1, 1)), mode="edge")


def fit_ground_plane(depth, traversable_mask) -> GroundPlane:
    """Total-least-squares plane through the masked pseudo-3D points.

    The normal is the right singular vector with the smallest singular value.
    Its sign is chosen so the mean unmasked point sits at nonnegative height;
    when that is zero (or nothing is unmasked) the normal points toward +D.
    """
    d = as_dense_map(depth)
    mask = as_binary_map(traversable_mask).astype(bool)
    check_same_shape(d, mask)
    pts = pseudo_points(d)
    sel = pts[mask]
    if sel.shape[0] < 3:
        raise InsufficientPointsError(f"need at least 3 masked points, got {sel.shape[0]}")
    centroid = sel.mean(axis=0)
    _, s, vt = np.linalg.svd(sel - centroid, full_matrices=False)
    if s[0] == 0.0 or s[1] <= _RANK_TOL * s[0]:
        raise DegeneratePlaneError("masked points are collinear; plane is undetermined")
    normal = vt[-1]
    normal = normal / np.linalg.norm(normal)

    rest = pts[~mask]
    lean = float(np.mean((rest - centroid) @ normal)) if rest.size else 0.0
    if abs(lean) > _TIE_TOL:
        flip = lean < 0
    else:
        flip = normal[2] < 0
    if flip:
        normal = -normal
    return GroundPlane(normal=normal, offset=float(centroid @ normal))


def slope_risk(normals, plane: GroundPlane, depth) -> np.ndarray:
    """``(1 - |n . n_gnd|) * D / median(D)``, clamped to [0, 1]."""
    d = as_dense_map(depth)
    normals = np.asarray(normals, dtype=np.float64)
    if normals.shape != (3,) + d.shape:
        raise GeometryError(f"normal map shape {normals.shape} does not match depth {d.shape}")
    med = float(np.median(d))
    if med <= 0:
        raise GeometryError("median depth must be positive")
    align = np.abs(np.tensordot(plane.normal, normals, axes=1))
    return np.clip((1.0 - align) * (d / med), 0.0, 1.0)


def height_to_risk(height, beta: float = DEFAULT_BETA) -> np.ndarray:
    """``1 - exp(-beta * max(h, 0))``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    h = np.maximum(np.asarray(height, dtype=np.float64), 0.0)
    return -np.expm1(-beta * h)


def elevation_risk(depth, plane: GroundPlane, beta: float = DEFAULT_BETA) -> np.ndarray:
    d = as_dense_map(depth)
    return height_to_risk(plane.signed_height(d), beta)


def pseudo_risk_labels(depth, traversable_mask, beta: float = DEFAULT_BETA) -> PseudoRiskLabels:
    """Slope and elevation pseudo-labels for one training sample."""
    plane = fit_ground_plane(depth, traversable_mask)
    normals = surface_normals(depth)
    return PseudoRiskLabels(
        slope=slope_risk(normals, plane, depth),
        elevation=elevation_risk(depth, plane, beta),
        beta=beta,
        plane=plane,
    )
