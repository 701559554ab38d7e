"""Greedy sparse-recovery baselines: OMP and CoSaMP."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import InvalidInputError, NumericalError, ShapeError


@dataclass(frozen=True)
class GreedyConfig:
    sparsity: int
    max_iters: int = 100
    residual_tol: float = 1e-10

    def __post_init__(self):
        if self.sparsity < 1 or self.max_iters < 1:
            raise InvalidInputError("sparsity and max_iters must be at least 1")
        if not self.residual_tol >= 0:
            raise InvalidInputError("residual_tol must be nonnegative")


def default_sparsity(n):
    return math.ceil(0.1 * n)


def _check(x_mat, y, cfg):
    x_mat = np.asarray(x_mat, dtype=float)
    y = np.asarray(y, dtype=float)
    if x_mat.ndim != 2 or y.shape != (x_mat.shape[0],):
        raise ShapeError(f"incompatible shapes {x_mat.shape} and {y.shape}")
    if cfg.sparsity > x_mat.shape[1]:
        raise InvalidInputError("sparsity exceeds the number of columns")
    return x_mat, y


def _lstsq_on(x_mat, y, support):
    sub = x_mat[:, support]
    coef, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
    if rank < len(support):
        raise NumericalError(
            f"least squares on a support of {len(support)} columns has rank {rank}"
        )
    return coef


def omp(x_mat, y, cfg):
    """Orthogonal matching pursuit.

    Each step adds the column with the largest normalized correlation
    ``|x_j^T r| / ||x_j||`` and refits all selected coefficients by least
    squares.  Stops after ``cfg.sparsity`` atoms, ``cfg.max_iters`` steps, or
    once ``||r|| <= cfg.residual_tol``.
    """
    x_mat, y = _check(x_mat, y, cfg)
    norms = np.linalg.norm(x_mat, axis=0)
    if np.any(norms == 0):
        raise InvalidInputError("OMP needs nonzero columns")
    n = x_mat.shape[1]
    support = []
    coef = np.zeros(0)
    r = y.copy()
    for _ in range(min(cfg.sparsity, cfg.max_iters)):
        if np.linalg.norm(r) <= cfg.residual_tol:
            break
        corr = np.abs(x_mat.T @ r) / norms
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        coef = _lstsq_on(x_mat, y, support)
        r = y - x_mat[:, support] @ coef
    beta = np.zeros(n)
    beta[support] = coef
    return beta


def cosamp(x_mat, y, cfg):
    """Compressive sampling matching pursuit.

    Per iteration: take the ``2s`` largest entries of the proxy ``X^T r``,
    merge them with the current support, fit by least squares on the merged
    set, keep the ``s`` largest coefficients and update the residual.  The
    iterate with the smallest residual is returned.
    """
    x_mat, y = _check(x_mat, y, cfg)
    n = x_mat.shape[1]
    s = cfg.sparsity
    beta = np.zeros(n)
    r = y.copy()
    best, best_res = beta, np.linalg.norm(r)
    for _ in range(cfg.max_iters):
        if best_res <= cfg.residual_tol:
            break
        proxy = np.abs(x_mat.T @ r)
        omega = np.argsort(-proxy, kind="stable")[:min(2 * s, n)]
        merged = np.union1d(omega, np.flatnonzero(beta))
        b = np.zeros(n)
        b[merged] = _lstsq_on(x_mat, y, merged)
        keep = np.argsort(-np.abs(b), kind="stable")[:s]
        beta = np.zeros(n)
        beta[keep] = b[keep]
        r = y - x_mat @ beta
        res = np.linalg.norm(r)
        if res < best_res:
            best, best_res = beta, res
    return best
