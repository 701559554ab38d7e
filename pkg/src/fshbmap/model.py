"""Compound-Gaussian model: scale nonlinearity, marginal covariance and Type-II objectives.

The coefficient vector is modelled as ``beta = u * z`` with ``u ~ N(0, sigma_u^2 I)``
and ``z = h(x)``.  Type-II estimation picks the latent ``x`` by minimising the
negative log marginal posterior

    f(x) = y^T B(x)^{-1} y + log det B(x) + x^T x / sigma_x^2,
    B(x) = sigma_u^2 X diag(h(x))^2 X^T + sigma_eps^2 I,

or its fast surrogate in which ``log det B(x)`` is replaced by ``sum(x) / a``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np
from scipy.linalg import cho_solve, lapack

from .errors import InvalidInputError, NumericalError, ShapeError


@dataclass(frozen=True)
class HyperParams:
    """Hyperparameters of the compound-Gaussian model.

    ``sigma_x_sq`` may be ``inf``, which switches the Gaussian prior on ``x`` off.
    """

    sigma_u_sq: float = 1.0
    sigma_eps_sq: float = 0.1
    a: float = 1.0
    sigma_x_sq: float = 10.0
    tau: float = 0.0
    z_floor: float = 1e-8

    def __post_init__(self):
        for name in ("sigma_u_sq", "sigma_eps_sq", "sigma_x_sq", "z_floor"):
            value = getattr(self, name)
            if not value > 0:
                raise InvalidInputError(f"{name} must be positive, got {value!r}")
        if not (np.isfinite(self.sigma_u_sq) and np.isfinite(self.sigma_eps_sq)):
            raise InvalidInputError("sigma_u_sq and sigma_eps_sq must be finite")
        if self.a == 0 or not np.isfinite(self.a):
            raise InvalidInputError(f"a must be finite and nonzero, got {self.a!r}")
        if not self.tau >= 0:
            raise InvalidInputError(f"tau must be nonnegative, got {self.tau!r}")


@dataclass(frozen=True, eq=False)
class ModelMatrices:
    """Forward model ``X = psi @ phi``.

    Build instances with :func:`fshbmap.operators.compose_model`, which checks
    the dictionary for unitarity.
    """

    psi: np.ndarray
    phi: np.ndarray
    x_mat: np.ndarray

    @property
    def shape(self):
        return self.x_mat.shape

    @cached_property
    def gram(self):
        """``X^T X``, cached because every objective evaluation needs it."""
        g = self.x_mat.T @ self.x_mat
        return 0.5 * (g + g.T)


@dataclass(frozen=True, eq=False)
class LatentState:
    """Latent Type-II variable ``x`` together with its scale image ``z = h(x)``."""

    x: np.ndarray
    z: np.ndarray

    @classmethod
    def from_x(cls, x, a):
        x = np.asarray(x, dtype=float)
        return cls(x=x, z=apply_h(x, a))


@dataclass(frozen=True, eq=False)
class Measurement:
    """Measurement vector and the noise variance used to generate it."""

    y: np.ndarray
    noise_variance: float

    def __post_init__(self):
        if np.ndim(self.y) != 1:
            raise ShapeError("measurement vector must be one-dimensional")
        if not self.noise_variance >= 0:
            raise InvalidInputError("noise_variance must be nonnegative")


def as_vector(y):
    """Return the measurement vector of a :class:`Measurement` or array-like."""
    if isinstance(y, Measurement):
        return np.asarray(y.y, dtype=float)
    return np.asarray(y, dtype=float)


def apply_h(x, a):
    """Entry-wise scale nonlinearity ``h(x)_i = sqrt(exp(x_i / a))``.

    Evaluated as ``exp(x_i / (2 a))`` so the square root never sees an
    overflowed intermediate.
    """
    if a == 0:
        raise InvalidInputError("nonlinearity scale a must be nonzero")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("apply_h received a non-finite entry")
    with np.errstate(over="ignore"):
        return np.exp(x / (2.0 * a))


def cholesky_upper(a):
    """Upper Cholesky factor ``U`` with ``a = U^T U``.

    Raises
    ------
    NumericalError
        If ``a`` is not numerically positive definite. ``min_pivot`` holds the
        pivot at which the factorization broke down.
    """
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix to factorize has non-finite entries")
    u, info = lapack.dpotrf(a, lower=0, clean=1)
    if info > 0:
        k = info - 1
        pivot = float(a[k, k] - np.sum(u[:k, k] ** 2))
        raise NumericalError(
            f"Cholesky factorization failed at pivot {k} (value {pivot:.3e})",
            min_pivot=pivot,
        )
    if info < 0:
        raise NumericalError(f"dpotrf rejected argument {-info}")
    return u


def _check_latent(model, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.x_mat.shape[1]:
        raise ShapeError(
            f"latent vector has shape {x.shape}, model expects ({model.x_mat.shape[1]},)"
        )
    return x


def build_B(model, x, params):
    """Marginal measurement covariance ``sigma_u^2 X H(x)^2 X^T + sigma_eps^2 I``."""
    x = _check_latent(model, x)
    xz = model.x_mat * apply_h(x, params.a)
    b = params.sigma_u_sq * (xz @ xz.T)
    b = 0.5 * (b + b.T)
    b[np.diag_indices_from(b)] += params.sigma_eps_sq
    return b


@dataclass(frozen=True)
class ObjectiveTerms:
    """The pieces of the Type-II objective at one point."""

    data_fit: float
    log_det: float | None
    log_det_fast: float
    prior: float

    @property
    def exact(self):
        return self.data_fit + self.log_det + self.prior

    @property
    def fast(self):
        return self.data_fit + self.log_det_fast + self.prior


class Type2Objective:
    """Callable Type-II objective with the model-dependent work done once.

    Two algebraically equivalent routes are used.  When ``m <= n`` the
    ``m x m`` matrix ``B`` is factorized directly.  Otherwise the Woodbury
    identity and the determinant lemma move the factorization to the
    ``n x n`` matrix ``I + S X^T X S / sigma_eps^2`` with ``S = sigma_u diag(z)``,
    whose eigenvalues are all at least one.

    Parameters
    ----------
    model : ModelMatrices
    y : Measurement or array_like
    params : HyperParams
    exact : bool
        Return ``f`` (with ``log det B``) instead of the fast surrogate.
    route : {"auto", "measurement", "coefficient"}
    """

    def __init__(self, model, y, params, exact=False, route="auto"):
        y = as_vector(y)
        m, n = model.x_mat.shape
        if y.shape != (m,):
            raise ShapeError(f"measurement has shape {y.shape}, model expects ({m},)")
        if route == "auto":
            route = "measurement" if m <= n else "coefficient"
        if route not in ("measurement", "coefficient"):
            raise InvalidInputError(f"unknown route {route!r}")
        self.model = model
        self.y = y
        self.params = params
        self.exact = exact
        self.route = route
        self._yty = float(y @ y)
        if route == "coefficient":
            self._xty = model.x_mat.T @ y
            self._gram = model.gram

    def terms(self, x, need_log_det=True):
        p = self.params
        x = _check_latent(self.model, x)
        z = apply_h(x, p.a)
        if not np.all(np.isfinite(z)):
            raise NumericalError("h(x) overflowed")
        if self.route == "measurement":
            u = cholesky_upper(build_B(self.model, x, p))
            w = cho_solve((u, False), self.y)
            data_fit = float(self.y @ w)
            log_det = 2.0 * float(np.sum(np.log(np.diag(u))))
        else:
            s = math.sqrt(p.sigma_u_sq) * z
            k = np.outer(s, s) * self._gram / p.sigma_eps_sq
            k[np.diag_indices_from(k)] += 1.0
            u = cholesky_upper(k)
            v = s * self._xty
            w = cho_solve((u, False), v)
            data_fit = (self._yty - float(v @ w) / p.sigma_eps_sq) / p.sigma_eps_sq
            m = self.y.shape[0]
            log_det = m * math.log(p.sigma_eps_sq) + 2.0 * float(np.sum(np.log(np.diag(u))))
        prior = float(x @ x) / p.sigma_x_sq
        return ObjectiveTerms(
            data_fit=data_fit,
            log_det=log_det if need_log_det else None,
            log_det_fast=float(np.sum(x)) / p.a,
            prior=prior,
        )

    def __call__(self, x):
        t = self.terms(x)
        return t.exact if self.exact else t.fast


def objective_exact(x, y, model, params):
    """Type-II objective ``f(x)``; the quantity minimised by Type-II estimation."""
    return Type2Objective(model, y, params, exact=True)(x)


def objective_fast(x, y, model, params):
    """Fast surrogate of ``f`` with ``log det B(x)`` replaced by ``sum(x) / a``."""
    return Type2Objective(model, y, params, exact=False)(x)


def finite_diff_gradient(loss, x, step=1e-5):
    """Central-difference gradient of a scalar ``loss`` at ``x``."""
    if not step > 0:
        raise InvalidInputError("step must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        hi, lo = loss(x + e), loss(x - e)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericalError(f"non-finite loss while differencing coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * step)
    return grad
