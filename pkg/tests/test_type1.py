from contextlib import nullcontext

import numpy as np
import pytest

from fshbmap.errors import ShapeError
from fshbmap.model import HyperParams
from fshbmap.operators import compose_model
from fshbmap.type1 import solve_type1, solve_type1_thresholded


def sandwich_system(model, y, z, params):
    """Coefficient matrix and right-hand side of diag(z) A diag(z) u = diag(z) X^T y / s_eps."""
    xm = model.x_mat
    lam = np.diag(z)
    lam_inv = np.diag(1 / z)
    inner = xm.T @ xm / params.sigma_eps_sq + lam_inv @ (np.eye(len(z)) / params.sigma_u_sq) @ lam_inv
    return lam @ inner @ lam, lam @ xm.T @ y / params.sigma_eps_sq


def random_instance(rng, n, m=None):
    m = n if m is None else m
    psi = rng.normal(size=(m, n))
    phi, _ = np.linalg.qr(rng.normal(size=(n, n)))
    params = HyperParams(sigma_u_sq=rng.uniform(0.2, 3), sigma_eps_sq=rng.uniform(0.05, 1))
    return compose_model(psi, phi), rng.normal(size=m), rng.uniform(0.1, 10, n), params


def test_identity_example():
    model = compose_model(np.eye(2), np.eye(2))
    res = solve_type1(model, [2.0, 4.0], [1.0, 1.0], HyperParams(sigma_u_sq=1, sigma_eps_sq=1))
    np.testing.assert_allclose(res.beta, [1.0, 2.0])
    np.testing.assert_allclose(res.u, [1.0, 2.0])


def test_scalar_example():
    model = compose_model(np.eye(1), np.eye(1))
    res = solve_type1(model, [1.0], [10.0], HyperParams(sigma_u_sq=1, sigma_eps_sq=1))
    assert res.beta[0] == pytest.approx(1 / 1.01, abs=1e-12)
    assert res.u[0] == pytest.approx(1 / 10.1, abs=1e-12)


def test_matches_sandwiched_system():
    rng = np.random.default_rng(12)
    for _ in range(100):
        model, y, z, params = random_instance(rng, 8)
        coef, rhs = sandwich_system(model, y, z, params)
        u = np.linalg.solve(coef, rhs)
        res = solve_type1(model, y, z, params)
        np.testing.assert_allclose(res.beta, z * u, atol=1e-8, rtol=0)
        np.testing.assert_allclose(res.beta, z * res.u, rtol=1e-12, atol=0)


def test_residual_bound():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n = int(rng.integers(1, 65))
        model, y, z, params = random_instance(rng, n, int(rng.integers(1, 65)))
        res = solve_type1(model, y, z, params)
        rhs = model.x_mat.T @ y / params.sigma_eps_sq
        assert res.residual_norm <= 1e-10 * (1 + np.linalg.norm(rhs))


def test_least_squares_limit():
    rng = np.random.default_rng(14)
    q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    model = compose_model(q, np.eye(6))
    y = rng.normal(size=6)
    res = solve_type1(model, y, np.ones(6), HyperParams(sigma_u_sq=1e8, sigma_eps_sq=0.5))
    ls = q.T @ y
    assert np.linalg.norm(res.beta - ls) <= 1e-4 * np.linalg.norm(ls)


def test_z_floor_clamps():
    model = compose_model(np.eye(3), np.eye(3))
    res = solve_type1(model, np.ones(3), np.array([0.0, 1e-300, 1.0]), HyperParams())
    assert np.all(np.isfinite(res.beta)) and np.all(np.isfinite(res.u))


def test_shape_checked():
    model = compose_model(np.eye(3), np.eye(3))
    with pytest.raises(ShapeError):
        solve_type1(model, np.ones(3), np.ones(2), HyperParams())


class TestThresholded:
    def test_zero_tau_is_full_solve(self):
        rng = np.random.default_rng(15)
        model, y, z, params = random_instance(rng, 8)
        full = solve_type1(model, y, z, params)
        thr = solve_type1_thresholded(model, y, z, params)
        np.testing.assert_allclose(thr.beta, full.beta, atol=1e-10, rtol=0)
        assert not thr.empty_support

    def test_empty_support(self):
        rng = np.random.default_rng(16)
        model, y, z, params = random_instance(rng, 5)
        params = HyperParams(tau=float(z.max()))
        with pytest.warns(RuntimeWarning):
            res = solve_type1_thresholded(model, y, z, params)
        assert res.empty_support
        np.testing.assert_array_equal(res.beta, 0)
        np.testing.assert_array_equal(res.u, 0)

    def test_median_threshold_restricted_oracle(self):
        rng = np.random.default_rng(17)
        model, y, z, params = random_instance(rng, 8)
        tau = float(np.median(z))
        params = HyperParams(sigma_u_sq=params.sigma_u_sq, sigma_eps_sq=params.sigma_eps_sq, tau=tau)
        res = solve_type1_thresholded(model, y, z, params)
        support = z > tau
        assert np.all(res.beta[~support] == 0) and np.all(res.u[~support] == 0)
        coef, rhs = sandwich_system(model, y, z, params)
        s = np.flatnonzero(support)
        u_s = np.linalg.solve(coef[np.ix_(s, s)], rhs[s])
        np.testing.assert_allclose(res.u[s], u_s, atol=1e-8, rtol=0)
        np.testing.assert_allclose(res.beta[s], z[s] * u_s, atol=1e-8, rtol=0)

    def test_support_shrinks_with_tau(self):
        rng = np.random.default_rng(18)
        model, y, z, base = random_instance(rng, 12)
        sizes = []
        for tau in np.linspace(0, z.max() * 1.1, 15):
            params = HyperParams(sigma_u_sq=base.sigma_u_sq, sigma_eps_sq=base.sigma_eps_sq, tau=tau)
            with pytest.warns(RuntimeWarning) if tau >= z.max() else nullcontext():
                sizes.append(solve_type1_thresholded(model, y, z, params).support.size)
        assert all(a >= b for a, b in zip(sizes, sizes[1:]))

