"""In-class maximization, gradients, and degeneration sweeps."""

import numpy as np
import pytest

from lambdabar.galerkin import ConformalFactor, assemble
from lambdabar.lattices import (
    KleinModulus,
    TorusModulus,
    equilateral_modulus,
    square_modulus,
)
from lambdabar.maximize import (
    EQUILATERAL_MAX,
    ClusterEnvelope,
    DensityParameterization,
    degeneration_sweep,
    eigenvalue_gradient,
    maximize_in_class,
)
from lambdabar.spectrum import TORUS_CEILING


class TestParameterization:
    def test_dimension_count(self):
        param = DensityParameterization(square_modulus(), 2)
        assert param.dim == (5 * 5 - 1)  # one cos+sin pair per half-plane rep

    def test_zero_coefficients_give_flat(self):
        param = DensityParameterization(square_modulus(), 1)
        f = param.factor(np.zeros(param.dim), 32)
        np.testing.assert_allclose(f.values, 1.0, atol=1e-15)

    def test_positive_by_construction(self):
        param = DensityParameterization(square_modulus(), 2)
        rng = np.random.default_rng(0)
        f = param.factor(rng.standard_normal(param.dim), 32)
        assert f.values.min() > 0

    def test_klein_parameterization_is_glide_invariant(self):
        param = DensityParameterization(KleinModulus(2.0), 1)
        rng = np.random.default_rng(1)
        f = param.factor(rng.standard_normal(param.dim), 32)
        assemble(f, 4)  # raises if the symmetrized density is not invariant


class TestMaximize:
    def test_square_class_flat_value_feasible(self):
        rep = maximize_in_class(square_modulus(), 1, 6, budget=50, seed=0)
        assert rep.best_value >= 4 * np.pi**2 - 1e-9
        assert rep.ceiling == TORUS_CEILING

    def test_trace_monotone_and_recorded(self):
        rep = maximize_in_class(square_modulus(), 1, 6, budget=40, seed=0)
        bests = [b for _, _, b in rep.trace]
        assert all(x <= y + 1e-15 for x, y in zip(bests, bests[1:]))
        assert rep.evaluations <= 40

    def test_equilateral_flat_start_stays_at_max(self):
        rep = maximize_in_class(equilateral_modulus(), 2, 6, budget=150,
                                seed=0)
        assert 45.0 <= rep.best_value <= 45.70
        assert rep.best_value <= EQUILATERAL_MAX * 1.0025
        assert rep.passed

    def test_equilateral_random_start_recovers(self):
        rep = maximize_in_class(equilateral_modulus(), 1, 6, budget=800,
                                seed=5, start="random")
        assert rep.best_value >= 0.98 * EQUILATERAL_MAX

    def test_budget_respected(self):
        rep = maximize_in_class(square_modulus(), 1, 5, budget=17, seed=0)
        assert rep.evaluations == 17


class TestGradient:
    @pytest.fixture()
    def rect_factor(self):
        m = TorusModulus(0.0, 1.3)
        return ConformalFactor(m, func=lambda x, y: np.exp(
            0.3 * np.cos(2 * np.pi * x) + 0.2 * np.sin(2 * np.pi * y / 1.3)))

    def test_homothety_direction(self, rect_factor):
        n = 64
        g = eigenvalue_gradient(rect_factor, rect_factor.sample(n),
                                bandwidth=8, resolution=n)
        lam1 = assemble(rect_factor, 8, n).solve(3).lambda1()
        assert g == pytest.approx(-lam1, rel=1e-10)
        # normalized tone is scale-invariant: d(lambda1bar) = 0 for df = f
        mass = rect_factor.mass(n)
        dbar = g * mass + lam1 * mass  # product rule with d(mass) = mass
        assert abs(dbar) < 1e-8 * lam1 * mass

    def test_matches_finite_differences(self, rect_factor):
        n = 64
        rng = np.random.default_rng(4)
        direction = rng.standard_normal((n, n))
        spec = np.fft.fft2(direction)
        spec[6:-6, :] = 0
        spec[:, 6:-6] = 0
        direction = np.real(np.fft.ifft2(spec))
        g = eigenvalue_gradient(rect_factor, direction, bandwidth=8,
                                resolution=n)
        base = rect_factor.sample(n)
        h = 1e-4

        def lam(eps):
            f = ConformalFactor.from_grid(rect_factor.base,
                                          base + eps * direction)
            return assemble(f, 8, n).solve(3).lambda1()
        fd = (lam(h) - lam(-h)) / (2 * h)
        assert g == pytest.approx(fd, rel=1e-4)

    def test_direction_away_from_eigenfunction_mass(self, rect_factor):
        # a perturbation supported where u1^2 f is small barely moves lambda1
        n = 64
        sol = assemble(rect_factor, 8, n).solve(3)
        u2 = np.abs(sol.eigenfunction_grid(1, n)) ** 2
        f = rect_factor.sample(n)
        weight = u2 * f
        mask = (weight < np.quantile(weight, 0.1)).astype(float)
        g_small = eigenvalue_gradient(rect_factor, mask, 8, n)
        g_big = eigenvalue_gradient(rect_factor, 1.0 - mask, 8, n)
        assert abs(g_small) < 0.1 * abs(g_big)

    def test_multiplicity_refusal(self):
        env = eigenvalue_gradient(ConformalFactor.one(square_modulus()),
                                  lambda x, y: np.cos(2 * np.pi * x),
                                  bandwidth=6)
        assert isinstance(env, ClusterEnvelope)
        assert env.multiplicity == 4


class TestDegenerationSweep:
    def test_torus_ray_trends_down(self):
        rows = degeneration_sweep([TorusModulus(0, b) for b in (1, 2, 4, 8)],
                                  per_class_budget=30)
        bests = [r["best_lambda1bar"] for r in rows]
        assert all(x >= y for x, y in zip(bests, bests[1:]))
        assert all(b <= 16 * np.pi + 1e-9 for b in bests)

    def test_klein_small_b_under_eight_pi(self):
        rows = degeneration_sweep([KleinModulus(b) for b in (1.2, 0.6, 0.3)],
                                  per_class_budget=25)
        assert rows[-1]["best_lambda1bar"] < 8 * np.pi + 1.0
        for r in rows:
            assert r["budget"] == 25
