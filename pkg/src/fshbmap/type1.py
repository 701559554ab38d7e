"""Type-I estimation: the Gaussian component ``u`` given the scales ``z``."""
from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np
from scipy.linalg import cho_solve

from .errors import ShapeError
from .model import as_vector, cholesky_upper


@dataclass(frozen=True, eq=False)
class Type1Result:
    """Solution of the Type-I system.

    ``residual_norm`` is the 2-norm residual of the linear system actually
    solved.  ``support`` lists the coefficients left free by thresholding
    (all of them for the unthresholded solve).
    """

    u: np.ndarray
    beta: np.ndarray
    residual_norm: float
    support: np.ndarray
    empty_support: bool = False


def _prepare(model, y, z, params):
    y = as_vector(y)
    m, n = model.x_mat.shape
    z = np.asarray(z, dtype=float)
    if y.shape != (m,) or z.shape != (n,):
        raise ShapeError(f"got y {y.shape} and z {z.shape} for a {m}x{n} model")
    z = np.maximum(z, params.z_floor)
    rhs = model.x_mat.T @ y / params.sigma_eps_sq
    return z, rhs


def _precision(model, z, params, idx=None):
    """``X^T X / sigma_eps^2 + diag(z)^-2 / sigma_u^2``, optionally restricted to ``idx``."""
    gram = model.gram if idx is None else model.gram[np.ix_(idx, idx)]
    zz = z if idx is None else z[idx]
    a = gram / params.sigma_eps_sq
    a[np.diag_indices_from(a)] += 1.0 / (params.sigma_u_sq * zz**2)
    return a


def solve_type1(model, y, z, params):
    """Posterior-mode coefficients ``beta = z * u`` for fixed scales ``z``.

    Solves ``(X^T X / sigma_eps^2 + diag(z)^-2 / sigma_u^2) beta = X^T y / sigma_eps^2``
    by Cholesky and recovers ``u = beta / z``.  Entries of ``z`` below
    ``params.z_floor`` are clamped first.
    """
    z, rhs = _prepare(model, y, z, params)
    a = _precision(model, z, params)
    beta = cho_solve((cholesky_upper(a), False), rhs)
    residual = float(np.linalg.norm(a @ beta - rhs))
    return Type1Result(
        u=beta / z, beta=beta, residual_norm=residual, support=np.arange(z.size)
    )


def solve_type1_thresholded(model, y, z, params):
    """Type-I solve restricted to the support ``{i : z_i > tau}``.

    The restricted system keeps the rows and columns in the support of
    ``diag(z) A diag(z) u = diag(z) X^T y / sigma_eps^2`` (``A`` as in
    :func:`solve_type1`); coefficients outside it are exactly zero.  With an
    empty support the zero vector is returned, ``empty_support`` is set and a
    warning is issued.
    """
    z, rhs = _prepare(model, y, z, params)
    n = z.size
    support = np.flatnonzero(z > params.tau)
    if support.size == 0:
        warnings.warn(f"no scale exceeds tau={params.tau}; returning zeros", RuntimeWarning)
        return Type1Result(
            u=np.zeros(n), beta=np.zeros(n), residual_norm=0.0,
            support=support, empty_support=True,
        )
    # diag(z_S) A_SS diag(z_S) u_S = z_S rhs_S  is solved as  A_SS beta_S = rhs_S.
    a = _precision(model, z, params, support)
    beta_s = cho_solve((cholesky_upper(a), False), rhs[support])
    residual = float(np.linalg.norm(a @ beta_s - rhs[support]))
    beta = np.zeros(n)
    u = np.zeros(n)
    beta[support] = beta_s
    u[support] = beta_s / z[support]
    return Type1Result(u=u, beta=beta, residual_norm=residual, support=support)
