"""Dense H x W scalar maps and the ``.dmap`` on-disk format.

A dense map is a 2-D ``float64`` numpy array holding finite values, row-major,
origin at the top-left. Unit-interval maps additionally hold values in [0, 1].
On disk a map is stored as an ASCII header ``DMAP <height> <width>\\n``
followed by ``height * width`` little-endian float32 values.
"""
from __future__ import annotations

import operator
import os
import re

import numpy as np

__all__ = [
    "DenseMapError",
    "DimensionMismatchError",
    "NonFiniteError",
    "OutOfUnitIntervalError",
    "DmapFormatError",
    "DmapHeaderError",
    "DmapDimensionOverflowError",
    "DmapTruncatedError",
    "DmapNonFiniteError",
    "as_dense_map",
    "as_unit_map",
    "as_binary_map",
    "clamp_to_unit",
    "new_filled",
    "elementwise",
    "check_same_shape",
    "save_dmap",
    "load_dmap",
    "dumps_dmap",
    "loads_dmap",
]

# Refuses headers that would allocate more than this many cells.
MAX_DMAP_CELLS = 1 << 28

_HEADER_RE = re.compile(rb"DMAP ([0-9]+) ([0-9]+)\n")


class DenseMapError(ValueError):
    pass


class DimensionMismatchError(DenseMapError):
    pass


class NonFiniteError(DenseMapError):
    pass


class OutOfUnitIntervalError(DenseMapError):
    pass


class DmapFormatError(DenseMapError):
    """Base class for ``.dmap`` decoding failures."""


class DmapHeaderError(DmapFormatError):
    pass


class DmapDimensionOverflowError(DmapFormatError):
    pass


class DmapTruncatedError(DmapFormatError):
    pass


class DmapNonFiniteError(DmapFormatError):
    pass


def as_dense_map(values) -> np.ndarray:
    """Validate ``values`` as a dense map and return a float64 copy."""
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 2:
        raise DenseMapError(f"dense map must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DenseMapError(f"dense map must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("dense map contains NaN or Inf")
    return arr


def as_unit_map(values) -> np.ndarray:
    """Like :func:`as_dense_map`, but every value must lie in [0, 1].

    Never clamps; use :func:`clamp_to_unit` for post-sigmoid rounding dust.
    """
    arr = as_dense_map(values)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise OutOfUnitIntervalError(
            f"values outside [0, 1]: min={arr.min()!r}, max={arr.max()!r}"
        )
    return arr


def as_binary_map(values) -> np.ndarray:
    arr = as_unit_map(values)
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise DenseMapError("binary map must contain only 0 and 1")
    return arr


def clamp_to_unit(values) -> np.ndarray:
    return np.clip(as_dense_map(values), 0.0, 1.0)


def new_filled(height: int, width: int, fill: float) -> np.ndarray:
    if int(height) != height or int(width) != width or height < 1 or width < 1:
        raise DenseMapError(f"dimensions must be positive integers, got {height}x{width}")
    if not np.isfinite(fill):
        raise NonFiniteError(f"fill value must be finite, got {fill!r}")
    return np.full((int(height), int(width)), float(fill), dtype=np.float64)


def check_same_shape(*maps: np.ndarray) -> tuple[int, int]:
    shape = np.shape(maps[0])
    for m in maps[1:]:
        if np.shape(m) != shape:
            raise DimensionMismatchError(f"shape mismatch: {shape} vs {np.shape(m)}")
    return shape


_OPS = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "min": np.minimum,
    "max": np.maximum,
}


def elementwise(map_a, map_b, op: str) -> np.ndarray:
    """Apply ``op`` (add, sub, mul, min, max) pixel by pixel."""
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}; expected one of {sorted(_OPS)}") from None
    a = as_dense_map(map_a)
    b = as_dense_map(map_b)
    check_same_shape(a, b)
    with np.errstate(over="ignore", invalid="ignore"):
        out = fn(a, b)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{op} overflowed")
    return out


def dumps_dmap(values) -> bytes:
    arr = as_dense_map(values)
    payload = arr.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise NonFiniteError("value overflows float32")
    h, w = arr.shape
    return b"DMAP %d %d\n" % (h, w) + payload.tobytes(order="C")


def loads_dmap(data: bytes) -> np.ndarray:
    m = _HEADER_RE.match(data)
    if m is None:
        raise DmapHeaderError("missing or malformed 'DMAP <height> <width>' header")
    h, w = int(m.group(1)), int(m.group(2))
    if h < 1 or w < 1:
        raise DmapHeaderError(f"non-positive dimensions {h}x{w}")
    if h * w > MAX_DMAP_CELLS:
        raise DmapDimensionOverflowError(f"{h}x{w} exceeds {MAX_DMAP_CELLS} cells")
    payload = data[m.end():]
    expected = 4 * h * w
    if len(payload) < expected:
        raise DmapTruncatedError(f"payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise DmapHeaderError(f"{len(payload) - expected} trailing bytes after payload")
    arr = np.frombuffer(payload, dtype="<f4").reshape(h, w)
    if not np.all(np.isfinite(arr)):
        raise DmapNonFiniteError("payload contains NaN or Inf")
    return arr.astype(np.float64)


def save_dmap(values, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_dmap(values))


def load_dmap(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return loads_dmap(fh.read())
