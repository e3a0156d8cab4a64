"""Binary PPM (P6) and PGM (P5) reading and writing, maxval 255.

RGB images travel through the package as float arrays of shape (3, H, W) with
values in [0, 1]; grayscale visualizations as (H, W) arrays in [0, 1].
"""
from __future__ import annotations

import os

import numpy as np

__all__ = ["RasterFormatError", "quantize", "write_ppm", "read_ppm", "write_pgm", "read_pgm"]


class RasterFormatError(ValueError):
    pass


def quantize(values) -> np.ndarray:
    """Map [0, 1] floats to 8-bit codes, ``round(255 * v)``."""
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
        raise RasterFormatError("raster values must be finite and within [0, 1]")
    return np.rint(v * 255.0).astype(np.uint8)


def _header(magic: bytes, height: int, width: int) -> bytes:
    return b"%s\n%d %d\n255\n" % (magic, width, height)


def write_ppm(rgb, path: str | os.PathLike) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise RasterFormatError(f"expected (3, H, W) image, got {rgb.shape}")
    codes = quantize(rgb).transpose(1, 2, 0)
    with open(path, "wb") as fh:
        fh.write(_header(b"P6", codes.shape[0], codes.shape[1]) + codes.tobytes())


def write_pgm(gray, path: str | os.PathLike) -> None:
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise RasterFormatError(f"expected (H, W) map, got {gray.shape}")
    codes = quantize(gray)
    with open(path, "wb") as fh:
        fh.write(_header(b"P5", codes.shape[0], codes.shape[1]) + codes.tobytes())


def _parse(data: bytes, magic: bytes) -> tuple[int, int, bytes]:
    # Netpbm header: magic, width, height, maxval separated by whitespace,
    # '#' comments allowed, then exactly one whitespace byte before the payload.
    if data[:2] != magic:
        raise RasterFormatError(f"expected {magic.decode()} magic, got {data[:2]!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise RasterFormatError("malformed raster header")
        fields.append(int(data[start:pos]))
    if not data[pos : pos + 1].isspace():
        raise RasterFormatError("malformed raster header")
    width, height, maxval = fields
    if maxval != 255:
        raise RasterFormatError(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise RasterFormatError(f"bad raster dimensions {width}x{height}")
    return height, width, data[pos + 1 :]


def read_ppm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        height, width, payload = _parse(fh.read(), b"P6")
    if len(payload) != 3 * height * width:
        raise RasterFormatError("PPM payload size does not match header")
    codes = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return codes.transpose(2, 0, 1).astype(np.float64) / 255.0


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        height, width, payload = _parse(fh.read(), b"P5")
    if len(payload) != height * width:
        raise RasterFormatError("PGM payload size does not match header")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).astype(np.float64) / 255.0
