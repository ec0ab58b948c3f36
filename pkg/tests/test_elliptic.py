"""Elliptic integrals, the P-function, and spherical pullback densities."""

import numpy as np
import pytest

from lambdabar.elliptic import (
    POLE_THRESHOLD,
    WeierstrassP,
    complete_E,
    complete_E_quadrature,
    sphere_pullback_factor,
    stereographic_to_sphere,
)
from lambdabar.lattices import Lattice


class TestCompleteE:
    def test_endpoints(self):
        assert complete_E(0.0) == pytest.approx(np.pi / 2, abs=1e-15)
        assert complete_E(1.0) == 1.0

    def test_paper_modulus(self):
        k = 2 * np.sqrt(2) / 3
        agm = complete_E(k)
        quad = complete_E_quadrature(k)
        assert agm == pytest.approx(quad, abs=1e-12)
        # the sharp Klein-bottle constant: 12 E(2 sqrt2/3) ~ 13.365
        assert 12 * agm == pytest.approx(13.365, abs=1e-3)

    def test_agm_matches_quadrature_on_random_moduli(self):
        rng = np.random.default_rng(0)
        for k in rng.uniform(0, 1, 50):
            assert complete_E(k) == pytest.approx(complete_E_quadrature(k),
                                                  abs=1e-10)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            complete_E(1.5)
        with pytest.raises(ValueError):
            complete_E(-0.1)


def lattice_sum_oracle(z, basis, radius=120):
    """Direct symmetric lattice sum for P(z); slow, independent path."""
    idx = np.arange(-radius, radius + 1)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    mask = (i != 0) | (j != 0)
    w = (basis[0, 0] * i + basis[0, 1] * j)[mask] + 1j * (
        basis[1, 0] * i + basis[1, 1] * j)[mask]
    # symmetric summation cancels the conditionally convergent part
    terms = 1.0 / (z - w) ** 2 - 1.0 / w**2
    return 1.0 / z**2 + np.sum(terms)


@pytest.fixture(scope="module")
def wp():
    return WeierstrassP(Lattice([1, 0], [0, 1]))


class TestWeierstrassP:

    def test_against_lattice_sum_oracle(self, wp):
        for z in (0.31 + 0.22j, -0.12 + 0.4j, 0.25 - 0.33j):
            direct = lattice_sum_oracle(z, wp.lattice.basis)
            series, _ = wp(z)
            assert abs(series - direct) < 2e-4 * max(1.0, abs(direct))

    def test_evenness(self, wp):
        rng = np.random.default_rng(1)
        z = rng.uniform(-0.4, 0.4, 10) + 1j * rng.uniform(-0.4, 0.4, 10)
        p1, dp1 = wp(z)
        p2, dp2 = wp(-z)
        np.testing.assert_allclose(p1, p2, atol=1e-11)
        np.testing.assert_allclose(dp1, -dp2, atol=1e-11)

    def test_periodicity(self, wp):
        rng = np.random.default_rng(2)
        z = rng.uniform(0.1, 0.45, 6) + 1j * rng.uniform(0.1, 0.45, 6)
        p1, dp1 = wp(z)
        p2, dp2 = wp(z + 1 + 1j)
        np.testing.assert_allclose(p1, p2, atol=1e-10)
        np.testing.assert_allclose(dp1, dp2, atol=1e-10)

    def test_cubic_residual_on_grid(self, wp):
        s = (np.arange(20) + 0.5) / 20
        x, y = np.meshgrid(s, s, indexing="ij")
        res = wp.differential_residual((x + 1j * y).ravel())
        scale = 1.0 + np.abs(wp((x + 1j * y).ravel())[0]) ** 3
        assert np.max(res / scale) < 1e-9

    def test_half_periods_are_critical(self, wp):
        for h in wp.half_period_points():
            _, dp = wp(h)
            assert abs(dp) < 1e-10

    def test_pole_flag(self, wp):
        _, _, flagged = wp(np.array([1e-4 + 0j, 0.3 + 0.3j]),
                           return_mask=True)
        assert flagged.tolist() == [True, False]
        assert POLE_THRESHOLD == 1e-3

    def test_equilateral_invariants(self):
        wp = WeierstrassP(Lattice([1, 0], [0.5, np.sqrt(3) / 2]))
        # hexagonal symmetry kills g2
        assert abs(wp.g2) < 1e-10 * abs(wp.g3) ** (2 / 3) * 100
        z = 0.21 + 0.17j
        assert wp.differential_residual(np.array([z]))[0] < 1e-9

    def test_generic_lattice(self):
        # skewed, rotated, scaled: complex invariants, all identities hold
        lat = Lattice([1.1, 0.3], [-0.2, 1.4])
        wp = WeierstrassP(lat)
        z = 0.23 + 0.31j
        direct = lattice_sum_oracle(z, lat.basis)
        series, _ = wp(z)
        assert abs(series - direct) < 2e-4 * max(1.0, abs(direct))
        rng = np.random.default_rng(3)
        pts = rng.uniform(-0.3, 0.3, 8) + 1j * rng.uniform(-0.3, 0.3, 8)
        p1, dp1 = wp(pts)
        p2, dp2 = wp(-pts)
        np.testing.assert_allclose(p1, p2, atol=1e-9)
        w1 = complex(lat.e1[0], lat.e1[1])
        w2 = complex(lat.e2[0], lat.e2[1])
        p3, dp3 = wp(pts + w1)
        p4, dp4 = wp(pts + w2)
        np.testing.assert_allclose(p1, p3, atol=1e-9)
        np.testing.assert_allclose(p1, p4, atol=1e-9)
        res = wp.differential_residual(pts)
        assert np.max(res / (1 + np.abs(p1) ** 3)) < 1e-9


class TestStereographic:
    def test_unit_norm_everywhere(self):
        w = np.array([0j, 1j, 3 + 4j, 1e8 + 0j, 1e-8 + 1e-8j, -2.5 + 0.1j])
        pts = stereographic_to_sphere(w)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=-1), 1.0,
                                   atol=1e-14)

    def test_landmarks(self):
        np.testing.assert_allclose(stereographic_to_sphere(np.array([0j]))[0],
                                   [0, 0, -1], atol=1e-15)
        big = stereographic_to_sphere(np.array([1e12 + 0j]))[0]
        np.testing.assert_allclose(big, [0, 0, 1], atol=1e-10)

    def test_chart_consistency_across_unit_circle(self):
        # the two chart branches must agree near |w| = 1
        w = np.exp(1j * 0.7) * np.array([0.999999, 1.000001])
        pts = stereographic_to_sphere(w)
        assert np.linalg.norm(pts[0] - pts[1]) < 1e-5


class TestPullbackFactor:
    def test_identity_at_origin(self):
        # F = id on C: factor 4/(1+|z|^2)^2 -> 4 at 0
        val = sphere_pullback_factor(np.array([0j]), np.array([1 + 0j]))
        assert val[0] == pytest.approx(4.0, abs=1e-14)

    def test_total_integral_is_degree_times_4pi(self):
        wp = WeierstrassP(Lattice([1, 0], [0, 1]))
        for n in (96, 192):
            s = (np.arange(n) + 0.5) / n
            x, y = np.meshgrid(s, s, indexing="ij")
            p, dp = wp((x + 1j * y).ravel())
            integral = np.sum(sphere_pullback_factor(p, dp)) / n**2
            assert integral == pytest.approx(8 * np.pi, rel=1e-6)

    def test_vanishing_order_at_branch_points(self):
        wp = WeierstrassP(Lattice([1, 0], [0, 1]))
        for bp in list(wp.half_period_points()) + [0.0]:
            f1 = sphere_pullback_factor(*wp(np.array([bp + 1e-3])))
            f2 = sphere_pullback_factor(*wp(np.array([bp + 5e-4])))
            order = np.log(f1[0] / f2[0]) / np.log(2.0)
            assert order == pytest.approx(2.0, abs=0.05)

    def test_quadratic_factor_at_pole(self):
        wp = WeierstrassP(Lattice([1, 0], [0, 1]))
        for r in (1e-2, 1e-3):
            val = sphere_pullback_factor(*wp(np.array([r + 0j])))[0]
            assert val / r**2 == pytest.approx(16.0, rel=1e-4)

    def test_finite_and_continuous_through_pole_region(self):
        wp = WeierstrassP(Lattice([1, 0], [0, 1]))
        z = np.array([2e-3 + 0j, 1e-3 + 1e-3j, 5e-4 + 0j])
        vals = sphere_pullback_factor(*wp(z))
        assert np.all(np.isfinite(vals)) and np.all(vals >= 0)
