"""Spectrum container invariants and the hard topological ceilings."""

import numpy as np
import pytest

from lambdabar.spectrum import (
    KLEIN_CEILING,
    TORUS_CEILING,
    CeilingViolation,
    Spectrum,
)


def test_ceiling_values():
    assert TORUS_CEILING == pytest.approx(16 * np.pi)
    assert KLEIN_CEILING == pytest.approx(32 * np.pi)


def test_basic_accessors():
    s = Spectrum(np.array([0.0, 2.0, 2.0, 5.0]), area=3.0)
    assert s.lambda1 == 2.0
    assert s.lambda1_bar == 6.0
    assert s.multiplicity_of_lambda1() == 2
    assert s.multiplicity_groups() == [(0.0, 1), (2.0, 2), (5.0, 1)]
    np.testing.assert_allclose(s.normalized, [0, 6, 6, 15])


def test_torus_ceiling_enforced():
    with pytest.raises(CeilingViolation):
        Spectrum(np.array([0.0, TORUS_CEILING + 1e-6]), area=1.0,
                 surface="torus")
    # within the 1e-9 tolerance band is admitted
    Spectrum(np.array([0.0, TORUS_CEILING + 5e-10]), area=1.0,
             surface="torus")


def test_klein_ceiling_enforced():
    with pytest.raises(CeilingViolation):
        Spectrum(np.array([0.0, KLEIN_CEILING / 2 + 1]), area=2.0,
                 surface="klein")
    Spectrum(np.array([0.0, KLEIN_CEILING / 2 - 1]), area=2.0,
             surface="klein")


def test_rejects_malformed():
    with pytest.raises(ValueError):
        Spectrum(np.array([0.0, 3.0, 2.0]), area=1.0)
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, 2.0]), area=1.0)  # no constant mode
    with pytest.raises(ValueError):
        Spectrum(np.array([0.0, 1.0]), area=-1.0)
    with pytest.raises(ValueError):
        Spectrum(np.array([0.0, 1.0]), area=1.0, surface="sphere")


def test_cluster_grouping_respects_relative_tolerance():
    lam = 10.0
    s = Spectrum(np.array([0.0, lam, lam * (1 + 1e-8), lam * 1.5]), area=1.0)
    assert s.multiplicity_of_lambda1() == 2
