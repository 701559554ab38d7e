"""End-to-end reconstruction and the Monte-Carlo / sweep experiment harnesses.

All randomness is derived from the task seed: measurement noise, the random
initial latent vector and the SPSA perturbations each draw from their own
stream, so changing one never shifts the others.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
import time

import numpy as np

from .baselines import GreedyConfig, cosamp, default_sparsity, omp
from .errors import InvalidInputError, NumericalError, ShapeError
from .metrics import SsimConfig, ssim
from .model import HyperParams, Measurement, Type2Objective, apply_h, as_vector
from .operators import DictionaryKind, RadonSpec, build_dictionary, build_sensing_matrix, compose_model
from .spsa import SpsaConfig, SpsaTrace, csv_text, run_spsa
from .type1 import solve_type1, solve_type1_thresholded

_STREAM_NOISE = 0
_STREAM_INIT = 1
_STREAM_SPSA = 2


def derive_seed(seed, stream):
    """Independent 63-bit seed for ``stream`` of a task seeded with ``seed``."""
    state = np.random.SeedSequence([int(seed), stream]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 | int(state[1] >> 1)


@lru_cache(maxsize=8)
def build_model(radon, dictionary):
    """Sensing matrix, dictionary and their product for a geometry (cached)."""
    psi = build_sensing_matrix(radon)
    phi = build_dictionary(dictionary, radon.image_width, radon.image_height)
    model = compose_model(psi, phi)
    for arr in (model.psi, model.phi, model.x_mat):
        arr.setflags(write=False)
    return model


@dataclass(frozen=True, eq=False)
class ReconTask:
    """One reconstruction problem; ``ground_truth`` is a 2-D image in ``[0, 1]``."""

    ground_truth: np.ndarray
    radon: RadonSpec
    dictionary: DictionaryKind = DictionaryKind.HAAR2D
    params: HyperParams = field(default_factory=HyperParams)
    spsa: SpsaConfig = field(default_factory=SpsaConfig)
    seed: int = 0
    ssim_config: SsimConfig = field(default_factory=SsimConfig)

    def __post_init__(self):
        gt = np.asarray(self.ground_truth, dtype=float)
        if gt.shape != (self.radon.image_height, self.radon.image_width):
            raise ShapeError(
                f"ground truth {gt.shape} does not match geometry "
                f"{self.radon.image_height}x{self.radon.image_width}"
            )
        object.__setattr__(self, "ground_truth", gt)
        object.__setattr__(self, "dictionary", DictionaryKind(self.dictionary))

    @property
    def model(self):
        return build_model(self.radon, self.dictionary)

    def with_iters(self, n_iters, seed=None, stability_A=None):
        """Copy with a new iteration budget; ``stability_A=None`` rescales it to the budget."""
        spsa = replace(self.spsa, n_iters=n_iters, stability_A=stability_A)
        return replace(self, spsa=spsa, seed=self.seed if seed is None else seed)


@dataclass(eq=False)
class ReconResult:
    beta: np.ndarray
    image: np.ndarray
    ssim: float
    wall_time_s: float
    loss_evals: int
    x: np.ndarray
    z: np.ndarray
    trace: SpsaTrace | None = None
    sparsity: int | None = None


def simulate_measurement(image, psi, sigma_eps_sq, seed):
    """``y = psi @ image + noise`` with i.i.d. Gaussian noise of variance ``sigma_eps_sq``."""
    image = np.asarray(image, dtype=float).ravel()
    psi = np.asarray(psi)
    if psi.shape[1] != image.size:
        raise ShapeError(f"psi has {psi.shape[1]} columns, image has {image.size} pixels")
    clean = psi @ image
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clean.size) * np.sqrt(sigma_eps_sq)
    return Measurement(y=clean + noise, noise_variance=float(sigma_eps_sq))


def simulate_for_task(task, sigma_eps_sq=None):
    """Measurement of the task's ground truth; noise variance defaults to the task's."""
    if sigma_eps_sq is None:
        sigma_eps_sq = task.params.sigma_eps_sq
    return simulate_measurement(
        task.ground_truth, task.model.psi, sigma_eps_sq,
        derive_seed(task.seed, _STREAM_NOISE),
    )


def initial_latent(seed, n):
    """Random starting point with entries uniform on ``(0, 1)``."""
    return np.random.default_rng(derive_seed(seed, _STREAM_INIT)).random(n)


def _finish(task, x, y, t0, loss_evals, trace):
    model = task.model
    params = task.params
    z = apply_h(x, params.a)
    solve = solve_type1_thresholded if params.tau > 0 else solve_type1
    sol = solve(model, y, z, params)
    image = (model.phi @ sol.beta).reshape(task.ground_truth.shape)
    wall = time.perf_counter() - t0
    return ReconResult(
        beta=sol.beta, image=image, ssim=ssim(image, task.ground_truth, task.ssim_config),
        wall_time_s=wall, loss_evals=loss_evals, x=x, z=z, trace=trace,
    )


def reconstruct_fshbmap(task, y):
    """Type-II estimation of ``x`` by SPSA on the fast objective, then the Type-I solve."""
    t0 = time.perf_counter()
    model = task.model
    x0 = initial_latent(task.seed, model.x_mat.shape[1])
    cfg = replace(task.spsa, seed=derive_seed(task.seed, _STREAM_SPSA))
    if cfg.n_iters == 0:
        x, trace = x0, SpsaTrace(x_final=x0)
    else:
        objective = Type2Objective(model, y, task.params, exact=False)
        x, trace = run_spsa(objective, x0, cfg)
    return _finish(task, x, y, t0, trace.loss_evals, trace)


def reconstruct_random_x(task, y):
    """Type-I reconstruction from a random, unrefined latent vector."""
    t0 = time.perf_counter()
    x = initial_latent(task.seed, task.model.x_mat.shape[1])
    return _finish(task, x, y, t0, 0, None)


GREEDY_METHODS = {"omp": omp, "cosamp": cosamp}


def default_sparsity_grid(n):
    """Sparsity levels tried by the greedy baselines: 5% to 20% of ``n``."""
    base = default_sparsity(n)
    return tuple(sorted({max(1, round(f * base)) for f in (0.5, 1.0, 1.5, 2.0)}))


def reconstruct_greedy(task, y, method, sparsities=None, max_iters=None):
    """OMP or CoSaMP at each sparsity level, keeping the best-SSIM result.

    ``max_iters=None`` lets OMP reach ``s`` atoms and gives CoSaMP 100
    iterations.  Sparsity levels whose least-squares fits are rank deficient
    are skipped; if every level fails the last error is raised.
    """
    try:
        solver = GREEDY_METHODS[method]
    except KeyError:
        raise InvalidInputError(f"unknown greedy method {method!r}") from None
    t0 = time.perf_counter()
    model = task.model
    n = model.x_mat.shape[1]
    sparsities = default_sparsity_grid(n) if sparsities is None else tuple(sparsities)
    if not sparsities:
        raise InvalidInputError("sparsity list must not be empty")
    y = as_vector(y)
    best, error = None, None
    for s in sparsities:
        iters = max_iters if max_iters is not None else (s if method == "omp" else 100)
        try:
            beta = solver(model.x_mat, y, GreedyConfig(int(s), max_iters=iters))
        except NumericalError as exc:
            error = exc
            continue
        image = (model.phi @ beta).reshape(task.ground_truth.shape)
        score = ssim(image, task.ground_truth, task.ssim_config)
        if best is None or score > best[0]:
            best = (score, beta, image, int(s))
    if best is None:
        raise error
    score, beta, image, s = best
    return ReconResult(
        beta=beta, image=image, ssim=score, wall_time_s=time.perf_counter() - t0,
        loss_evals=0, x=np.empty(0), z=np.empty(0), sparsity=s,
    )


METHODS = ("fshbmap", "random_x", "omp", "cosamp")


def reconstruct(task, y, method, sparsities=None):
    """Dispatch to one of :data:`METHODS`."""
    if method == "fshbmap":
        return reconstruct_fshbmap(task, y)
    if method == "random_x":
        return reconstruct_random_x(task, y)
    return reconstruct_greedy(task, y, method, sparsities)


@dataclass(frozen=True)
class CompareRow:
    method: str
    ssim: float
    time_s: float
    loss_evals: int
    sparsity: int | None = None


def compare_methods(task, y=None, methods=METHODS, sparsities=None):
    """Run every method on one measurement; rows are ranked by SSIM, best first.

    ``loss_evals`` counts the two objective evaluations of each SPSA update;
    evaluations spent on trace logging are reported in the trace instead.
    Ties keep the order of ``methods``.
    """
    y = simulate_for_task(task) if y is None else y
    results = {}
    for method in methods:
        results[method] = reconstruct(task, y, method, sparsities)
    rows = [
        CompareRow(
            method=m, ssim=r.ssim, time_s=r.wall_time_s,
            loss_evals=r.trace.update_evals if r.trace is not None else 0,
            sparsity=r.sparsity,
        )
        for m, r in results.items()
    ]
    rows.sort(key=lambda r: -r.ssim)
    return rows, results


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(header, rows))


@dataclass
class MonteCarloSummary:
    mean: float
    min: float
    max: float
    std: float
    trials: list  # (seed, objective value, ssim)

    @property
    def ssims(self):
        return np.array([t[2] for t in self.trials])

    @property
    def objectives(self):
        return np.array([t[1] for t in self.trials])

    def to_csv(self, path):
        _write_csv(path, ["trial", "f_tilde", "ssim"],
                   [(i, f, s) for i, (_, f, s) in enumerate(self.trials)])


def _summary(values):
    values = np.asarray(values, dtype=float)
    return dict(mean=float(values.mean()), min=float(values.min()),
                max=float(values.max()), std=float(values.std()))


def monte_carlo_random_x(task, n_trials, y=None, exact=False):
    """Random-x reconstructions with seeds ``task.seed + i`` on one measurement.

    The measurement is simulated from the task seed unless supplied.  Each
    trial also records the Type-II objective (the fast one unless ``exact``)
    at its latent vector.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    y = simulate_for_task(task) if y is None else y
    objective = Type2Objective(task.model, y, task.params, exact=exact)
    trials = []
    for i in range(n_trials):
        result = reconstruct_random_x(replace(task, seed=task.seed + i), y)
        trials.append((task.seed + i, objective(result.x), result.ssim))
    return MonteCarloSummary(trials=trials, **_summary([t[2] for t in trials]))


@dataclass(frozen=True)
class SweepRow:
    dictionary: str
    n_iters: int
    mean_ssim: float
    std_ssim: float
    mean_time_s: float
    ssims: tuple = ()


def sweep_rows_to_csv(rows, path):
    _write_csv(path, ["dictionary", "n_iters", "mean_ssim", "std_ssim", "mean_time_s"],
               [(r.dictionary, r.n_iters, r.mean_ssim, r.std_ssim, r.mean_time_s) for r in rows])


def sweep_spsa_iterations(task, iter_list, trials_per_point, y=None, shared_schedule=True):
    """Mean SSIM and wall time of fsHBMAP for each SPSA iteration count.

    Trial ``i`` of every point uses seed ``task.seed + i`` for its starting
    point and perturbations, and all trials share one measurement.  With
    ``shared_schedule`` every point uses the gain offset of the longest run,
    so a shorter run is an exact prefix of a longer one and the sweep traces
    quality along a single trajectory.  Otherwise each point rescales the
    offset to its own budget.
    """
    iter_list = list(iter_list)
    if not iter_list:
        raise ValueError("iter_list must not be empty")
    if trials_per_point < 1:
        raise ValueError("trials_per_point must be at least 1")
    y = simulate_for_task(task) if y is None else y
    stability = task.with_iters(max(iter_list)).spsa.stability_A if shared_schedule else None
    rows = []
    for n_iters in iter_list:
        ssims, times = [], []
        for i in range(trials_per_point):
            point = task.with_iters(n_iters, seed=task.seed + i, stability_A=stability)
            result = reconstruct_fshbmap(point, y)
            ssims.append(result.ssim)
            times.append(result.wall_time_s)
        rows.append(SweepRow(
            dictionary=task.dictionary.value, n_iters=int(n_iters),
            mean_ssim=float(np.mean(ssims)), std_ssim=float(np.std(ssims)),
            mean_time_s=float(np.mean(times)), ssims=tuple(ssims),
        ))
    return rows


def estimate_noise_variance(y, model):
    """Noise variance from the part of ``y`` the forward model cannot explain.

    Projecting ``y`` onto an orthonormal basis of the orthogonal complement of
    ``range(X)`` removes the signal exactly and leaves i.i.d. noise of variance
    ``sigma_eps^2``; the median absolute deviation of those components gives a
    robust estimate.  Needs more measurements than the rank of ``X``.
    """
    y = as_vector(y)
    u, sv, _ = np.linalg.svd(model.x_mat, full_matrices=True)
    tol = sv.max() * max(model.x_mat.shape) * np.finfo(float).eps if sv.size else 0.0
    rank = int(np.sum(sv > tol))
    if rank >= y.size:
        raise InvalidInputError("noise estimation needs more measurements than rank(X)")
    c = u[:, rank:].T @ y
    mad = np.median(np.abs(c - np.median(c)))
    return float((mad / 0.6744897501960817) ** 2)
