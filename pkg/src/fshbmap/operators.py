"""Tomographic sensing matrices and unitary image dictionaries.

Images are vectorized row-major with the origin at the top-left corner:
pixel ``(row, col)`` occupies ``[col, col+1] x [row, row+1]`` in a frame whose
second axis points down.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np
from scipy.fft import dct

from .errors import InvalidInputError, ShapeError
from .model import ModelMatrices

_EPS = 1e-12


@dataclass(frozen=True)
class RadonSpec:
    """Parallel-beam geometry.

    ``n_rays`` projection directions, each sampled by ``samples_per_ray``
    parallel lines whose offsets are centered on the image and spaced by
    ``detector_spacing`` pixels.  When ``angles`` is omitted the directions are
    equiangular on ``[0, pi)``; when ``detector_spacing`` is omitted the lines
    span the image diagonal.
    """

    image_width: int
    image_height: int
    n_rays: int
    samples_per_ray: int
    angles: tuple = None
    detector_spacing: float = None

    def __post_init__(self):
        if self.image_width < 1 or self.image_height < 1:
            raise InvalidInputError("image dimensions must be positive")
        if self.n_rays < 1 or self.samples_per_ray < 1:
            raise InvalidInputError("n_rays and samples_per_ray must be at least 1")
        if self.angles is None:
            angles = tuple(math.pi * k / self.n_rays for k in range(self.n_rays))
        else:
            angles = tuple(float(t) for t in self.angles)
        if len(angles) != self.n_rays:
            raise InvalidInputError(f"expected {self.n_rays} angles, got {len(angles)}")
        if any(not (0.0 <= t < math.pi) for t in angles):
            raise InvalidInputError("angles must lie in [0, pi)")
        object.__setattr__(self, "angles", angles)
        if self.detector_spacing is None:
            diag = math.hypot(self.image_width, self.image_height)
            object.__setattr__(self, "detector_spacing", diag / self.samples_per_ray)
        if not self.detector_spacing > 0:
            raise InvalidInputError("detector_spacing must be positive")

    @property
    def n_pixels(self):
        return self.image_width * self.image_height

    @property
    def n_measurements(self):
        return self.n_rays * self.samples_per_ray

    def offsets(self):
        j = np.arange(self.samples_per_ray, dtype=float)
        return (j - (self.samples_per_ray - 1) / 2.0) * self.detector_spacing


@dataclass(frozen=True)
class IdentitySensing:
    """Every pixel observed directly: the sensing matrix is the identity."""

    image_width: int
    image_height: int

    def __post_init__(self):
        if self.image_width < 1 or self.image_height < 1:
            raise InvalidInputError("image dimensions must be positive")

    @property
    def n_pixels(self):
        return self.image_width * self.image_height

    @property
    def n_measurements(self):
        return self.n_pixels


class DictionaryKind(str, Enum):
    HAAR2D = "haar2d"
    DCT2D = "dct2d"
    IDENTITY = "identity"


def _ray_weights(p0, d, width, height):
    """Pixel indices and intersection lengths of the line ``p0 + s d`` with the grid."""
    s_lo, s_hi = -np.inf, np.inf
    for axis, size in ((0, width), (1, height)):
        if abs(d[axis]) < _EPS:
            if not (0.0 <= p0[axis] <= size):
                return None
            continue
        s0 = (0.0 - p0[axis]) / d[axis]
        s1 = (size - p0[axis]) / d[axis]
        s_lo = max(s_lo, min(s0, s1))
        s_hi = min(s_hi, max(s0, s1))
    if not s_hi > s_lo + _EPS:
        return None

    crossings = [np.array([s_lo, s_hi])]
    for axis, size in ((0, width), (1, height)):
        if abs(d[axis]) < _EPS:
            continue
        s = (np.arange(size + 1) - p0[axis]) / d[axis]
        crossings.append(s[(s > s_lo) & (s < s_hi)])
    s = np.unique(np.concatenate(crossings))
    lengths = np.diff(s)
    keep = lengths > _EPS
    mid = 0.5 * (s[:-1] + s[1:])[keep]
    lengths = lengths[keep]
    col = np.clip(np.floor(p0[0] + mid * d[0]).astype(int), 0, width - 1)
    row = np.clip(np.floor(p0[1] + mid * d[1]).astype(int), 0, height - 1)
    return row * width + col, lengths


def build_sensing_matrix(spec):
    """Sensing matrix for a :class:`RadonSpec` or :class:`IdentitySensing`."""
    if isinstance(spec, IdentitySensing):
        return np.eye(spec.n_pixels)
    return build_radon_matrix(spec)


def build_radon_matrix(spec):
    """Discrete Radon transform as an ``(n_rays * samples_per_ray) x n_pixels`` matrix.

    Entry ``(r, p)`` is the length of ray ``r`` inside pixel ``p``, found by
    clipping the line against every grid line it crosses.  Rows are ordered
    angle-major: all offsets of the first angle, then the second, and so on.
    """
    w, h = spec.image_width, spec.image_height
    psi = np.zeros((spec.n_measurements, spec.n_pixels))
    center = np.array([w / 2.0, h / 2.0])
    offsets = spec.offsets()
    r = 0
    for theta in spec.angles:
        d = np.array([math.cos(theta), math.sin(theta)])
        normal = np.array([-d[1], d[0]])
        for t in offsets:
            hit = _ray_weights(center + t * normal, d, w, h)
            if hit is not None:
                np.add.at(psi[r], hit[0], hit[1])
            r += 1
    return psi


def _haar_step(a, axis):
    even = np.take(a, np.arange(0, a.shape[axis], 2), axis=axis)
    odd = np.take(a, np.arange(1, a.shape[axis], 2), axis=axis)
    return np.concatenate([(even + odd), (even - odd)], axis=axis) / math.sqrt(2.0)


def _haar_analysis(images):
    """Multi-level 2-D Haar pyramid of a stack of square images (last two axes)."""
    out = images.copy()
    size = out.shape[-1]
    while size > 1:
        block = out[..., :size, :size]
        block = _haar_step(block, axis=-1)
        block = _haar_step(block, axis=-2)
        out[..., :size, :size] = block
        size //= 2
    return out


def _dct_matrix(n):
    # Row k holds the k-th orthonormal DCT-II basis vector.
    return dct(np.eye(n), norm="ortho", axis=0)


def build_dictionary(kind, width, height):
    """Unitary dictionary whose columns are image atoms (row-major pixels).

    ``haar2d`` is the full pyramid decomposition with coefficients in the
    usual nested layout, so column 0 is the constant atom.  ``dct2d`` is the
    separable orthonormal DCT-II basis.
    """
    kind = DictionaryKind(kind)
    n = width * height
    if kind is DictionaryKind.IDENTITY:
        return np.eye(n)
    if kind is DictionaryKind.DCT2D:
        return np.kron(_dct_matrix(height).T, _dct_matrix(width).T)
    if width != height or width & (width - 1):
        raise InvalidInputError(
            f"haar2d needs square power-of-two images, got {width}x{height}"
        )
    basis = np.eye(n).reshape(n, height, width)
    # Row p holds the coefficients of the delta at pixel p, so the stack is the
    # transpose of the analysis operator and its columns are the atoms.
    return _haar_analysis(basis).reshape(n, n)


def compose_model(psi, phi, check_unitary=True, tol=1e-10):
    """Bundle sensing matrix and dictionary with their product ``X = psi @ phi``."""
    psi = np.asarray(psi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if psi.ndim != 2 or phi.ndim != 2 or psi.shape[1] != phi.shape[0]:
        raise ShapeError(f"cannot compose psi {psi.shape} with phi {phi.shape}")
    if phi.shape[0] != phi.shape[1]:
        raise ShapeError("dictionary must be square")
    if check_unitary:
        err = np.max(np.abs(phi.T @ phi - np.eye(phi.shape[1])))
        if err > tol:
            raise InvalidInputError(f"dictionary is not unitary (max error {err:.2e})")
    return ModelMatrices(psi=psi, phi=phi, x_mat=psi @ phi)
