"""Moduli, reduction, dual lattices, and closed-form flat spectra."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lambdabar.lattices import (
    DegenerateLatticeError,
    KleinModulus,
    Lattice,
    TorusModulus,
    dual_lattice,
    equilateral_modulus,
    flat_klein_spectrum,
    flat_torus_spectrum,
    fundamental_tone_sweep,
    reduce_to_fundamental_domain,
    square_modulus,
)
from lambdabar.spectrum import TORUS_CEILING


def brute_force_reduction(lattice, radius=5):
    """Oracle: smallest-|tau| reduced form over all small remarkings."""
    basis = lattice.basis
    best = None
    for a, b, c, d in itertools.product(range(-radius, radius + 1), repeat=4):
        if a * d - b * c not in (1, -1):
            continue
        e1 = basis @ np.array([a, c])
        e2 = basis @ np.array([b, d])
        w1, w2 = complex(*e1), complex(*e2)
        if abs(w1) < 1e-12:
            continue
        tau = w2 / w1
        if tau.imag < 0:
            tau = -tau
        aa, bb = abs(tau.real), tau.imag
        if aa <= 0.5 + 1e-9 and aa * aa + bb * bb >= 1.0 - 1e-9:
            if best is None or bb < best[1] - 1e-12:
                best = (aa, bb)
    return best


class TestReduction:
    def test_square_already_reduced(self):
        m = reduce_to_fundamental_domain(Lattice([1, 0], [0, 1]))
        assert (m.a, m.b) == (0.0, 1.0)

    def test_sheared_hexagonal(self):
        # e2 = e1 + equilateral generator: reduction strips the shear
        m = reduce_to_fundamental_domain(
            Lattice([1, 0], [1.5, np.sqrt(3) / 2]))
        assert m.a == pytest.approx(0.5, abs=1e-12)
        assert m.b == pytest.approx(np.sqrt(3) / 2, abs=1e-12)
        oracle = brute_force_reduction(Lattice([1, 0], [1.5, np.sqrt(3) / 2]))
        assert m.a == pytest.approx(oracle[0], abs=1e-9)
        assert m.b == pytest.approx(oracle[1], abs=1e-9)

    def test_rectangular_rescales(self):
        m = reduce_to_fundamental_domain(Lattice([2, 0], [0, 6]))
        assert (m.a, m.b) == (0.0, 3.0)
        oracle = brute_force_reduction(Lattice([2, 0], [0, 6]))
        assert m.b == pytest.approx(oracle[1], abs=1e-9)

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateLatticeError):
            Lattice([1.0, 2.0], [2.0, 4.0])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(-4, 4), st.integers(-4, 4), st.integers(-4, 4),
           st.integers(-4, 4), st.floats(0.3, 3.0))
    def test_reduction_idempotent_and_invariant(self, a, b, c, d, scale):
        if a * d - b * c not in (1, -1):
            return
        base = equilateral_modulus().lattice().basis
        remarked = Lattice(scale * (base @ np.array([a, c])),
                           scale * (base @ np.array([b, d])))
        m = reduce_to_fundamental_domain(remarked)
        assert m.a == pytest.approx(0.5, abs=1e-9)
        assert m.b == pytest.approx(np.sqrt(3) / 2, abs=1e-9)
        again = reduce_to_fundamental_domain(m.lattice())
        assert (again.a, again.b) == pytest.approx((m.a, m.b), abs=1e-12)


class TestDualLattice:
    def test_square_self_dual(self):
        d = dual_lattice(Lattice([1, 0], [0, 1]))
        assert np.allclose(d.basis, np.eye(2))

    def test_scaling(self):
        d = dual_lattice(Lattice([2, 0], [0, 2]))
        assert np.allclose(sorted(np.abs(d.basis).ravel()), [0, 0, 0.5, 0.5])

    def test_biorthogonality_random(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            basis = rng.normal(size=(2, 2))
            if abs(np.linalg.det(basis)) < 0.1:
                continue
            lat = Lattice(basis[:, 0], basis[:, 1])
            dual = dual_lattice(lat)
            # integrality of <xi, gamma> over a block of lattice points
            for i, j, p, q in itertools.product(range(-3, 4), repeat=2 * 2):
                xi = dual.basis @ np.array([i, j])
                gamma = lat.basis @ np.array([p, q])
                val = xi @ gamma
                assert abs(val - round(val)) < 1e-9

    def test_double_dual(self):
        lat = Lattice([1.3, 0.2], [-0.4, 2.0])
        dd = dual_lattice(dual_lattice(lat))
        assert np.allclose(dd.basis, lat.basis)


def enumeration_oracle(m: TorusModulus, count: int, radius: int = 10):
    """Independent flat-spectrum oracle: brute dual-lattice enumeration."""
    vals = []
    for p in range(-radius, radius + 1):
        for q in range(-radius, radius + 1):
            vals.append(4 * np.pi**2 * (p**2 + (q - p * m.a) ** 2 / m.b**2))
    return np.sort(vals)[:count]


class TestFlatTorusSpectrum:
    def test_equilateral_value(self):
        spec = flat_torus_spectrum(equilateral_modulus(), 6)
        assert spec.lambda1_bar == pytest.approx(8 * np.pi**2 / np.sqrt(3),
                                                 abs=1e-10)
        assert spec.multiplicity_of_lambda1() >= 5  # 6-fold, count-truncated

    def test_square_against_enumeration(self):
        m = square_modulus()
        spec = flat_torus_spectrum(m, 12)
        assert spec.lambda1 == pytest.approx(4 * np.pi**2, abs=1e-12)
        assert spec.area == 1.0
        np.testing.assert_allclose(spec.eigenvalues,
                                   enumeration_oracle(m, 12), atol=1e-9)

    def test_tall_rectangle(self):
        spec = flat_torus_spectrum(TorusModulus(0, 2), 8)
        assert spec.lambda1 == pytest.approx(np.pi**2, abs=1e-12)
        assert spec.lambda1_bar == pytest.approx(2 * np.pi**2, abs=1e-12)
        np.testing.assert_allclose(spec.eigenvalues,
                                   enumeration_oracle(TorusModulus(0, 2), 8),
                                   atol=1e-9)

    def test_random_moduli_against_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = rng.uniform(0, 0.5)
            b = rng.uniform(np.sqrt(1 - a * a) + 1e-3, 2.5)
            m = TorusModulus(a, b)
            spec = flat_torus_spectrum(m, 10)
            np.testing.assert_allclose(spec.eigenvalues,
                                       enumeration_oracle(m, 10), atol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.05, 20.0), st.integers(-3, 3), st.integers(-3, 3),
           st.integers(-3, 3), st.integers(-3, 3))
    def test_homothety_invariance(self, c, a, b, cc, d):
        if a * d - b * cc not in (1, -1):
            return
        base = np.array([[1.0, 0.27], [0.0, 1.21]])
        lat = Lattice(base @ np.array([a, cc]), base @ np.array([b, d]))
        scaled = Lattice(c * lat.e1, c * lat.e2)
        m1 = reduce_to_fundamental_domain(lat)
        m2 = reduce_to_fundamental_domain(scaled)
        lb1 = flat_torus_spectrum(m1, 2).lambda1_bar
        lb2 = flat_torus_spectrum(m2, 2).lambda1_bar
        assert lb1 == pytest.approx(lb2, rel=1e-12)

    def test_grid_maximum_near_equilateral(self):
        best = None
        eq = equilateral_modulus()
        for a in np.linspace(0, 0.5, 6):
            for b in np.linspace(0.9, 2.0, 12):
                if a * a + b * b < 1:
                    continue
                m = TorusModulus(a, b)
                lb = flat_torus_spectrum(m, 2).lambda1_bar
                d = (a - eq.a) ** 2 + (b - eq.b) ** 2
                if best is None or lb > best[0]:
                    best = (lb, d)
        nearest = min(
            (eq.a - a) ** 2 + (eq.b - b) ** 2
            for a in np.linspace(0, 0.5, 6)
            for b in np.linspace(0.9, 2.0, 12) if a * a + b * b >= 1)
        assert best[1] == pytest.approx(nearest, abs=1e-12)

    def test_ceiling_respected_everywhere(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = rng.uniform(0, 0.5)
            b = rng.uniform(np.sqrt(1 - a * a) + 1e-3, 4.0)
            lb = flat_torus_spectrum(TorusModulus(a, b), 2).lambda1_bar
            assert lb <= TORUS_CEILING + 1e-9


def klein_quotient_oracle(b: float, count: int, radius: int = 14):
    """Brute-force glide-invariance check on double-cover eigenfunctions.

    For each (m, n), sample e^{i(mx + 2 pi n y/b)} and test whether some
    combination with its glide image is invariant; collect eigenvalues of
    the invariant ones.
    """
    rng = np.random.default_rng(11)
    pts = np.column_stack([rng.uniform(0, 2 * np.pi, 40),
                           rng.uniform(0, b, 40)])
    glide = np.column_stack([pts[:, 0] + np.pi, -pts[:, 1]])

    def phi(m, n, p):
        return np.exp(1j * (m * p[:, 0] + 2 * np.pi * n * p[:, 1] / b))

    vals = []
    for m in range(-radius, radius + 1):
        for n in range(0, radius + 1):
            f = phi(m, n, pts)
            g = phi(m, n, glide)  # equals (-1)^m phi(m, -n, pts)
            if n == 0:
                if np.allclose(g, f, atol=1e-12):
                    vals.append(m * m)
            else:
                # invariant combination f + c * phi(m,-n) exists iff the
                # glide maps the 2-dim span to itself; it always does, and
                # exactly one combination survives
                vals.append(m * m + (2 * np.pi * n / b) ** 2)
    return np.sort(np.array(vals))[:count]


class TestFlatKleinSpectrum:
    def test_b_pi(self):
        spec = flat_klein_spectrum(KleinModulus(np.pi), 8)
        assert spec.lambda1 == pytest.approx(4.0, abs=1e-12)
        assert spec.lambda1_bar == pytest.approx(4 * np.pi**2, abs=1e-10)

    def test_b_2pi(self):
        spec = flat_klein_spectrum(KleinModulus(2 * np.pi), 8)
        assert spec.lambda1 == pytest.approx(1.0, abs=1e-12)
        assert spec.lambda1_bar == pytest.approx(2 * np.pi**2, abs=1e-10)

    def test_large_b_direction(self):
        b = 64.0
        spec = flat_klein_spectrum(KleinModulus(b), 4)
        assert spec.lambda1 == pytest.approx((2 * np.pi / b) ** 2, rel=1e-12)
        assert spec.lambda1_bar == pytest.approx(4 * np.pi**3 / b, rel=1e-12)

    @pytest.mark.parametrize("b", [0.7, np.pi, 5.0])
    def test_against_quotient_oracle(self, b):
        spec = flat_klein_spectrum(KleinModulus(b), 12)
        np.testing.assert_allclose(spec.eigenvalues,
                                   klein_quotient_oracle(b, 12), atol=1e-9)

    def test_odd_n0_modes_are_anti_invariant(self):
        # the excluded n=0, odd-m cover modes flip sign under the glide
        b = 1.7
        rng = np.random.default_rng(2)
        pts = np.column_stack([rng.uniform(0, 2 * np.pi, 30),
                               rng.uniform(0, b, 30)])
        for m in (1, -3, 5):
            f = np.exp(1j * m * pts[:, 0])
            g = np.exp(1j * m * (pts[:, 0] + np.pi))
            assert np.allclose(g, -f, atol=1e-12)

    def test_rejects_bad_b(self):
        with pytest.raises(ValueError):
            KleinModulus(-1.0)


class TestSweep:
    def test_torus_ray(self):
        rows = fundamental_tone_sweep(
            [TorusModulus(0, b) for b in (1, 2, 4, 8)])
        lbs = [r["lambda1bar"] for r in rows]
        expected = [4 * np.pi**2, 2 * np.pi**2, np.pi**2, np.pi**2 / 2]
        np.testing.assert_allclose(lbs, expected, rtol=1e-12)
        assert [r["decaying"] for r in rows] == [False, True, True, True]

    def test_klein_ray_peaks_at_pi(self):
        grid = [KleinModulus(b) for b in (np.pi / 4, np.pi, 4 * np.pi)]
        rows = fundamental_tone_sweep(grid)
        lbs = [r["lambda1bar"] for r in rows]
        assert lbs[1] == max(lbs)
        assert lbs[1] == pytest.approx(4 * np.pi**2, abs=1e-10)

    def test_mixed_kinds_allowed(self):
        rows = fundamental_tone_sweep([square_modulus(), KleinModulus(2.0)])
        assert rows[0]["kind"] == "torus" and rows[1]["kind"] == "klein"
