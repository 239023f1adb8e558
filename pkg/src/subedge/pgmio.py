"""8-bit PGM (P2/P5) reading, PGM writing, and P6 PPM writing.

Intensities are mapped between [0, 1] floats and 8-bit samples by a factor of
255; writing clips to [0, 1] first (file output is always renderable even when
the in-memory image carries unclipped noise).
"""
from __future__ import annotations

import numpy as np

from .errors import InputOutputError
from .image import GrayImage

__all__ = ["read_pgm", "write_pgm", "parse_pgm", "encode_pgm", "write_ppm", "encode_ppm"]


def _tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c.isspace():
            i += 1
            continue
        if c == b"#":
            j = data.find(b"\n", i)
            i = n if j < 0 else j + 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace():
            j += 1
        yield i, data[i:j]
        i = j


def parse_pgm(data: bytes) -> GrayImage:
    """Decode a P2 or P5 PGM byte string into a GrayImage."""
    tok = _tokens(data)
    try:
        _, magic = next(tok)
    except StopIteration:
        raise InputOutputError("empty PGM data") from None
    if magic not in (b"P2", b"P5"):
        raise InputOutputError(f"unsupported PGM magic {magic!r} (want P2 or P5)")
    try:
        _, wtok = next(tok)
        _, htok = next(tok)
        pos, mtok = next(tok)
        width, height, maxval = int(wtok), int(htok), int(mtok)
    except (StopIteration, ValueError):
        raise InputOutputError("truncated or malformed PGM header") from None
    if width <= 0 or height <= 0:
        raise InputOutputError(f"bad PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise InputOutputError(f"unsupported PGM maxval {maxval} (8-bit only)")

    count = width * height
    if magic == b"P5":
        start = pos + len(mtok) + 1  # single whitespace byte after maxval
        raster = data[start : start + count]
        if len(raster) < count:
            raise InputOutputError("PGM raster shorter than header promises")
        values = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    else:
        values = np.empty(count, dtype=np.float64)
        k = 0
        for _, t in tok:
            if k >= count:
                break
            values[k] = int(t)
            k += 1
        if k < count:
            raise InputOutputError("PGM raster shorter than header promises")
    return GrayImage((values / 255.0).reshape(height, width))


def read_pgm(path) -> GrayImage:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc}") from exc
    return parse_pgm(data)


def encode_pgm(img: GrayImage) -> bytes:
    """Encode as binary P5 with maxval 255 (values clipped to [0, 1])."""
    raster = np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode()
    return header + raster.tobytes()


def write_pgm(path, img: GrayImage) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(encode_pgm(img))
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}") from exc


def encode_ppm(rgb: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 array as binary P6."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected an (H, W, 3) uint8 array")
    header = f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode()
    return header + rgb.tobytes()


def write_ppm(path, rgb: np.ndarray) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(encode_ppm(rgb))
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}") from exc
