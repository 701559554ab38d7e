import math

import numpy as np
import pytest

from fshbmap.errors import InvalidInputError, ShapeError
from fshbmap.operators import (
    DictionaryKind,
    RadonSpec,
    build_dictionary,
    build_radon_matrix,
    compose_model,
)


def sampled_ray(p0, d, width, height, ds=2e-4, extent=100.0):
    """Intersection lengths by dense point sampling along the ray."""
    s = np.arange(-extent, extent, ds) + ds / 2
    px = p0[0] + s * d[0]
    py = p0[1] + s * d[1]
    inside = (px >= 0) & (px < width) & (py >= 0) & (py < height)
    idx = np.floor(py[inside]).astype(int) * width + np.floor(px[inside]).astype(int)
    return np.bincount(idx, minlength=width * height) * ds


class TestRadonSpec:
    def test_defaults(self):
        spec = RadonSpec(32, 32, 18, 71)
        assert spec.n_measurements == 1278
        assert spec.angles[0] == 0.0 and len(spec.angles) == 18
        assert max(spec.angles) < math.pi
        assert spec.detector_spacing == pytest.approx(math.hypot(32, 32) / 71)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(n_rays=0), dict(samples_per_ray=0), dict(angles=(0.0, math.pi)),
         dict(angles=(0.1,)), dict(detector_spacing=-1.0)],
    )
    def test_invalid(self, kwargs):
        base = dict(image_width=4, image_height=4, n_rays=2, samples_per_ray=3)
        base.update(kwargs)
        with pytest.raises(InvalidInputError):
            RadonSpec(**base)


class TestRadonMatrix:
    def test_single_pixel(self):
        psi = build_radon_matrix(RadonSpec(1, 1, 1, 1))
        np.testing.assert_allclose(psi, [[1.0]])

    def test_top_row(self):
        psi = build_radon_matrix(RadonSpec(2, 2, 1, 2, detector_spacing=1.0))
        np.testing.assert_allclose(psi[0], [1, 1, 0, 0])
        np.testing.assert_allclose(psi[1], [0, 0, 1, 1])

    def test_vertical_ray(self):
        spec = RadonSpec(2, 3, 1, 2, angles=(math.pi / 2,), detector_spacing=1.0)
        psi = build_radon_matrix(spec)
        # offsets -0.5, +0.5 along the normal (-1, 0): columns 1 then 0
        np.testing.assert_allclose(psi[0], [0, 1, 0, 1, 0, 1], atol=1e-12)
        np.testing.assert_allclose(psi[1], [1, 0, 1, 0, 1, 0], atol=1e-12)

    def test_missing_ray_is_zero(self):
        psi = build_radon_matrix(RadonSpec(2, 2, 1, 3, detector_spacing=5.0))
        np.testing.assert_array_equal(psi[0], 0)
        np.testing.assert_array_equal(psi[2], 0)

    def test_against_point_sampling(self):
        rng = np.random.default_rng(3)
        w, h = 5, 4
        for _ in range(20):
            theta = rng.uniform(0, math.pi)
            t = rng.uniform(0.05, 2.5)
            # two samples at offsets -t and +t; check the +t row
            spec = RadonSpec(w, h, 1, 2, angles=(theta,), detector_spacing=2 * t)
            row = build_radon_matrix(spec)[1]
            d = np.array([math.cos(theta), math.sin(theta)])
            p0 = np.array([w / 2, h / 2]) + t * np.array([-d[1], d[0]])
            np.testing.assert_allclose(row, sampled_ray(p0, d, w, h), atol=2e-3)

    def test_adjoint_identity(self):
        rng = np.random.default_rng(1)
        psi = build_radon_matrix(RadonSpec(8, 8, 5, 11))
        f, g = rng.normal(size=64), rng.normal(size=55)
        assert (psi @ f) @ g == pytest.approx(f @ (psi.T @ g), abs=1e-10)

    def test_entry_bounds(self):
        psi = build_radon_matrix(RadonSpec(16, 16, 18, 36))
        assert psi.min() >= 0
        assert psi.max() <= math.sqrt(2) + 1e-12

    @pytest.mark.parametrize("angle_index", [0, 9])
    def test_mass_preservation_aligned(self, angle_index):
        spec = RadonSpec(16, 16, 18, 16, detector_spacing=1.0)
        psi = build_radon_matrix(spec)
        image = np.full(256, 0.7)
        rows = slice(16 * angle_index, 16 * (angle_index + 1))
        total = (psi[rows] @ image).sum() * spec.detector_spacing
        assert total == pytest.approx(image.sum(), rel=1e-6)

    def test_mass_preservation_oblique(self):
        spec = RadonSpec(6, 6, 18, 2000, detector_spacing=0.005)
        psi = build_radon_matrix(spec)
        image = np.ones(36)
        for k in range(18):
            total = (psi[2000 * k:2000 * (k + 1)] @ image).sum() * spec.detector_spacing
            assert total == pytest.approx(36.0, rel=5e-3)


class TestDictionary:
    def test_identity(self):
        np.testing.assert_array_equal(build_dictionary("identity", 2, 2), np.eye(4))

    def test_dct_two_by_two(self):
        c = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
        phi = build_dictionary(DictionaryKind.DCT2D, 2, 2)
        np.testing.assert_allclose(phi, np.kron(c, c), atol=1e-15)
        np.testing.assert_allclose(phi.T @ phi, np.eye(4), atol=1e-15)

    def test_haar_two_by_two(self):
        phi = build_dictionary("haar2d", 2, 2)
        np.testing.assert_allclose(phi[:, 0], [0.5] * 4)
        np.testing.assert_allclose(phi.T @ phi, np.eye(4), atol=1e-15)

    def test_dct_matches_separable_transform(self):
        from scipy.fft import dctn

        rng = np.random.default_rng(2)
        img = rng.normal(size=(4, 8))
        phi = build_dictionary("dct2d", 8, 4)
        np.testing.assert_allclose(phi.T @ img.ravel(), dctn(img, norm="ortho").ravel(), atol=1e-12)

    def test_haar_levels(self):
        # 4x4: constant atom, then the coarse detail atoms are +-1/4 on 2x2 blocks
        phi = build_dictionary("haar2d", 4, 4)
        np.testing.assert_allclose(phi[:, 0], np.full(16, 0.25))
        atom = phi[:, 1].reshape(4, 4)
        np.testing.assert_allclose(np.abs(atom), 0.25)
        np.testing.assert_allclose(atom[:, :2], 0.25)

    @pytest.mark.parametrize("kind", ["haar2d", "dct2d", "identity"])
    def test_unitary(self, kind):
        phi = build_dictionary(kind, 16, 16)
        assert np.max(np.abs(phi.T @ phi - np.eye(256))) <= 1e-10
        sign, logdet = np.linalg.slogdet(phi)
        assert abs(abs(sign * math.exp(logdet)) - 1) <= 1e-8

    @pytest.mark.parametrize("shape", [(6, 6), (4, 8)])
    def test_haar_rejects_bad_shape(self, shape):
        with pytest.raises(InvalidInputError):
            build_dictionary("haar2d", *shape)


class TestCompose:
    def test_identity(self):
        model = compose_model(np.eye(3), np.eye(3))
        np.testing.assert_array_equal(model.x_mat, np.eye(3))

    def test_identity_sensing_dct(self):
        phi = build_dictionary("dct2d", 2, 2)
        model = compose_model(np.eye(4), phi)
        np.testing.assert_allclose(model.x_mat, phi)

    def test_triple_loop_oracle(self):
        rng = np.random.default_rng(9)
        psi = rng.normal(size=(4, 4))
        phi, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        model = compose_model(psi, phi)
        naive = np.zeros((4, 4))
        for i in range(4):
            for j in range(4):
                for k in range(4):
                    naive[i, j] += psi[i, k] * phi[k, j]
        assert np.max(np.abs(model.x_mat - naive)) <= 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            compose_model(np.eye(3), np.eye(4))

    def test_non_unitary(self):
        with pytest.raises(InvalidInputError):
            compose_model(np.eye(2), 2 * np.eye(2))
