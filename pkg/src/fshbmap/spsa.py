"""Simultaneous perturbation stochastic approximation for Type-II estimation."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
import logging

import numpy as np

from .errors import InvalidInputError, NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpsaConfig:
    """Gain schedules and run length.

    ``alpha_k = alpha0 / (k + 1 + stability_A) ** alpha_exp`` and
    ``c_k = c0 / (k + 1) ** gamma_exp``.  ``stability_A=None`` resolves to
    ``0.1 * n_iters``.  The loss at ``x_k`` is logged every ``log_every``
    iterations and once more after the last update; ``log_every=0`` turns
    logging (and best-iterate selection) off.
    """

    alpha0: float = 0.1
    stability_A: float | None = None
    alpha_exp: float = 0.602
    c0: float = 0.1
    gamma_exp: float = 0.101
    n_iters: int = 500
    seed: int = 0
    log_every: int = 10

    def __post_init__(self):
        if not self.alpha0 > 0 or not self.c0 > 0:
            raise InvalidInputError("alpha0 and c0 must be positive")
        if not self.gamma_exp > 0:
            raise InvalidInputError("gamma_exp must be positive")
        if not 0.5 < self.alpha_exp <= 1.0:
            raise InvalidInputError("alpha_exp must lie in (0.5, 1]")
        if self.n_iters < 0 or self.log_every < 0:
            raise InvalidInputError("n_iters and log_every must be nonnegative")
        if self.stability_A is None:
            object.__setattr__(self, "stability_A", 0.1 * self.n_iters)
        if not self.stability_A >= 0:
            raise InvalidInputError("stability_A must be nonnegative")


@dataclass(frozen=True)
class SpsaRecord:
    k: int
    alpha_k: float
    c_k: float
    loss: float | None
    skipped: bool = False


@dataclass
class SpsaTrace:
    """Per-iteration history of one run.

    ``loss_evals = update_evals + logged_evals`` where ``update_evals`` is
    exactly two per iteration.
    """

    records: list = field(default_factory=list)
    x_final: np.ndarray | None = None
    final_loss: float | None = None
    best_k: int | None = None
    update_evals: int = 0
    logged_evals: int = 0

    @property
    def loss_evals(self):
        return self.update_evals + self.logged_evals

    @property
    def n_skipped(self):
        return sum(r.skipped for r in self.records)

    def rows(self):
        """CSV rows ``(k, alpha_k, c_k, loss)``; unlogged values are ``None``.

        A final row with ``k = n_iters`` carries the loss after the last update.
        """
        out = [(r.k, r.alpha_k, r.c_k, r.loss) for r in self.records]
        if self.final_loss is not None:
            out.append((len(self.records), None, None, self.final_loss))
        return out

    def to_csv_text(self):
        return csv_text(["k", "alpha_k", "c_k", "loss"], self.rows())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())


def format_float(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def csv_text(header, rows):
    """CSV with LF line endings; floats at 17 significant digits, ``None`` as empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([
            "" if v is None else v if isinstance(v, str) else format_float(v) for v in row
        ])
    return buf.getvalue()


def gain_sequences(cfg, k):
    """Step size ``alpha_k`` and perturbation size ``c_k`` at iteration ``k``."""
    if k < 0:
        raise InvalidInputError("iteration index must be nonnegative")
    alpha = cfg.alpha0 / (k + 1 + cfg.stability_A) ** cfg.alpha_exp
    c = cfg.c0 / (k + 1) ** cfg.gamma_exp
    return alpha, c


def bernoulli_perturbation(rng, n):
    """Symmetric +/-1 vector."""
    return 2.0 * rng.integers(0, 2, size=n) - 1.0


def spsa_gradient_estimate(loss, x, c_k, delta):
    """Two-evaluation gradient estimate along the perturbation ``delta``.

    Returns ``(loss(x + c delta) - loss(x - c delta)) / (2 c delta_i)``.
    """
    delta = np.asarray(delta, dtype=float)
    if not np.all(np.abs(delta) == 1.0):
        raise InvalidInputError("perturbation entries must be +/-1")
    if not c_k > 0:
        raise InvalidInputError("c_k must be positive")
    hi = loss(x + c_k * delta)
    lo = loss(x - c_k * delta)
    if not (np.isfinite(hi) and np.isfinite(lo)):
        raise NumericalError("non-finite loss at a perturbed point")
    return (hi - lo) / (2.0 * c_k * delta)


def _safe_loss(loss, x):
    try:
        value = loss(x)
    except NumericalError:
        return np.inf
    return value if np.isfinite(value) else np.inf


def run_spsa(loss, x0, cfg):
    """Minimise ``loss`` from ``x0`` with SPSA.

    Each iteration draws a fresh Bernoulli perturbation from a generator
    seeded with ``cfg.seed``.  An iteration whose perturbed losses are not
    finite is skipped and marked in the trace.  With logging on, the iterate
    with the lowest logged loss is returned (earliest on ties); otherwise the
    last iterate.

    Returns
    -------
    x : ndarray
    trace : SpsaTrace
    """
    rng = np.random.default_rng(cfg.seed)
    x = np.array(x0, dtype=float)
    trace = SpsaTrace()
    best_x, best_loss = x.copy(), np.inf
    stride = cfg.log_every

    def log(k, x):
        nonlocal best_x, best_loss
        value = _safe_loss(loss, x)
        trace.logged_evals += 1
        if value < best_loss:
            best_x, best_loss, trace.best_k = x.copy(), value, k
        return value

    for k in range(cfg.n_iters):
        alpha, c = gain_sequences(cfg, k)
        logged = log(k, x) if stride and k % stride == 0 else None
        delta = bernoulli_perturbation(rng, x.size)
        try:
            g = spsa_gradient_estimate(loss, x, c, delta)
            skipped = False
        except NumericalError:
            logger.info("SPSA iteration %d skipped: non-finite perturbed loss", k)
            skipped = True
        trace.update_evals += 2
        if not skipped:
            x = x - alpha * g
        trace.records.append(SpsaRecord(k, alpha, c, logged, skipped))

    if stride and cfg.n_iters > 0:
        trace.final_loss = log(cfg.n_iters, x)
        x = best_x
    trace.x_final = x
    return x, trace
