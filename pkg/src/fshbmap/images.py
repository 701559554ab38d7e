"""Test imagery: seeded phantoms and PGM input/output."""
from __future__ import annotations

import math
import os

import numpy as np

from .errors import FormatError, InvalidInputError


def make_phantom(width, height, seed=0, n_shapes=6, texture=0.1, supersample=4):
    """Piecewise-constant ellipses and rectangles with optional sinusoidal texture.

    Values lie in ``[0, 1]``.  Shapes are rasterized on a ``supersample``-times
    finer grid and box-averaged, which gives partial-volume edges.
    """
    if width < 1 or height < 1:
        raise InvalidInputError("phantom dimensions must be positive")
    rng = np.random.default_rng(seed)
    s = supersample
    yy, xx = np.mgrid[0:height * s, 0:width * s]
    # normalized coordinates in [-1, 1]
    u = (xx + 0.5) / (width * s) * 2 - 1
    v = (yy + 0.5) / (height * s) * 2 - 1

    img = np.zeros(u.shape)
    img[(u / 0.9) ** 2 + (v / 0.95) ** 2 <= 1] = 0.6
    for i in range(n_shapes):
        cx, cy = rng.uniform(-0.55, 0.55, size=2)
        rx, ry = rng.uniform(0.12, 0.4, size=2)
        level = rng.uniform(0.05, 0.95)
        theta = rng.uniform(0, math.pi)
        ct, st = math.cos(theta), math.sin(theta)
        du, dv = u - cx, v - cy
        pu, pv = ct * du + st * dv, -st * du + ct * dv
        if i % 2 == 0:
            mask = (pu / rx) ** 2 + (pv / ry) ** 2 <= 1
        else:
            mask = (np.abs(pu) <= rx) & (np.abs(pv) <= ry)
        img[mask] = level
    img = img.reshape(height, s, width, s).mean(axis=(1, 3))

    if texture > 0:
        fx, fy = rng.uniform(1.5, 4.0, size=2)
        phase = rng.uniform(0, 2 * math.pi)
        jj, ii = np.meshgrid(np.arange(width), np.arange(height))
        stripes = np.sin(2 * math.pi * (fx * jj / width + fy * ii / height) + phase)
        img = img + texture * stripes * (img > 0)
    return np.clip(img, 0.0, 1.0)


def _tokens(data):
    """Yield whitespace-separated header tokens of a PGM, skipping comments."""
    pos = 0
    while True:
        while pos < len(data) and chr(data[pos]).isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not chr(data[pos]).isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            return
        yield data[start:pos], pos


def read_pgm(path):
    """Read a P2 or P5 PGM and return pixel values divided by maxval."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = _tokens(data)
    try:
        magic, _ = next(tokens)
        width, _ = next(tokens)
        height, _ = next(tokens)
        maxval, end = next(tokens)
        width, height, maxval = int(width), int(height), int(maxval)
    except (StopIteration, ValueError) as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if magic not in (b"P2", b"P5") or width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: unsupported or malformed PGM header")
    count = width * height
    if magic == b"P2":
        try:
            values = np.array([int(t) for t, _ in tokens], dtype=float)
        except ValueError as exc:
            raise FormatError(f"{path}: non-integer pixel value") from exc
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[end + 1:end + 1 + count * dtype.itemsize]
        values = np.frombuffer(raw, dtype=dtype).astype(float)
    if values.size != count:
        raise FormatError(f"{path}: expected {count} pixels, found {values.size}")
    if np.any(values > maxval):
        raise FormatError(f"{path}: pixel value exceeds maxval")
    return values.reshape(height, width) / maxval


def pgm_bytes(image, maxval=255):
    """Binary (P5) PGM encoding, clipping values to ``[0, 1]`` first."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise InvalidInputError("PGM images must be two-dimensional")
    if not 0 < maxval < 65536:
        raise InvalidInputError(f"maxval must lie in [1, 65535], got {maxval}")
    height, width = image.shape
    q = np.rint(np.clip(image, 0.0, 1.0) * maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    return header + q.astype(dtype).tobytes()


def write_pgm(path, image, maxval=255):
    """Write a binary (P5) PGM atomically."""
    data = pgm_bytes(image, maxval)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
