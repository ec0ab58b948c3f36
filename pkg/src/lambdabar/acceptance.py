"""The acceptance suite: one function per criterion, shared by the test
module and the `verify-all` command.

Each criterion returns a CriterionResult with a pass flag and a one-line
detail; tolerances are pinned here, not in the callers.  The quick subset
covers the sub-minute criteria.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .elliptic import complete_E, complete_E_quadrature
from .galerkin import ConformalFactor, assemble
from .lattices import (KleinModulus, TorusModulus, equilateral_modulus,
                       flat_torus_spectrum, square_modulus)
from .maximize import EQUILATERAL_MAX, maximize_in_class
from .mobius import (MobiusMap, SphereSamples, area_monotonicity_trace,
                     capacity_profile, clifford_torus_map, conformal_area,
                     hersch_center, mobius_degeneration_study,
                     weierstrass_sphere_map)
from .revolution import klein_g0_lambda1bar, klein_g0_target
from .spectrum import KLEIN_CEILING, TORUS_CEILING, CeilingViolation, Spectrum
from .teich import continuity_certificate, teich_distance_tori

__all__ = ["CriterionResult", "run_criterion", "run_all", "CRITERIA",
           "QUICK_SUBSET"]


@dataclass
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.index}: {self.name} " \
               f"({self.seconds:.1f}s) {self.detail}"

    def as_dict(self) -> dict:
        return {"index": self.index, "name": self.name,
                "pass": self.passed, "detail": self.detail,
                "seconds": self.seconds}


def _c01_equilateral_flat() -> tuple[bool, str]:
    target = EQUILATERAL_MAX
    closed = flat_torus_spectrum(equilateral_modulus(), 6).lambda1_bar
    err_closed = abs(closed - target)
    galerkin = assemble(ConformalFactor.one(equilateral_modulus()), 8
                        ).spectrum(4).lambda1_bar
    err_gal = abs(galerkin - target)
    ok = err_closed < 1e-10 and err_gal < 1e-8
    return ok, (f"closed-form err {err_closed:.2e} (tol 1e-10), "
                f"galerkin err {err_gal:.2e} (tol 1e-8)")


def _c02_klein_g0() -> tuple[bool, str]:
    agm = complete_E(2.0 * np.sqrt(2.0) / 3.0)
    quadrature = complete_E_quadrature(2.0 * np.sqrt(2.0) / 3.0)
    e_err = abs(agm - quadrature)
    res = klein_g0_lambda1bar(1024)
    rel = abs(res.ratio_to_target - 1.0)
    ok = e_err < 1e-10 and rel < 5e-3 and not res.ambiguous
    return ok, (f"lambda1bar/pi = {res.lambda1bar / np.pi:.6f} vs "
                f"12E = {12 * agm:.6f} (rel {rel:.2e}, tol 5e-3); "
                f"AGM-quadrature gap {e_err:.2e}; structure {res.structure}")


def _c03_degree_area() -> tuple[bool, str]:
    smap = weierstrass_sphere_map()
    target = 8.0 * np.pi
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(20):
        t = rng.uniform(0.0, 2.0)
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        gamma = MobiusMap.rotation(q).compose(MobiusMap.dilation(t, axis))
        area = conformal_area(smap, gamma, resolution=256, check=False)
        worst = max(worst, abs(area - target) / target)
    rows = area_monotonicity_trace(clifford_torus_map(),
                                   np.array([1.0, 0, 0, 0]),
                                   np.linspace(0.0, 2.0, 10), resolution=128)
    areas = [r["area"] for r in rows]
    strict = all(areas[i] > areas[i + 1] for i in range(len(areas) - 1))
    ok = worst < 1e-3 and strict
    return ok, (f"worst degree-area deviation {worst:.2e} (tol 1e-3); "
                f"clifford strictly decreasing: {strict}")


def _c04_degeneration() -> tuple[bool, str]:
    rows = mobius_degeneration_study(t_grid=(0.0, 0.5, 0.9), bandwidth=12,
                                     resolution=512)
    lams = [r["lambda1"] for r in rows]
    strict = lams[0] > lams[1] > lams[2]
    ok = strict and lams[0] < 2.0
    return ok, (f"lambda1 = {[round(l, 4) for l in lams]}, strictly "
                f"decreasing: {strict}, t=0 value < 2: {lams[0] < 2.0}")


def _c05_capacity() -> tuple[bool, str]:
    prof, energy = capacity_profile(0.1)
    discrete = prof.discrete_energy(2048)
    rel = abs(discrete - energy) / energy
    ok = rel < 0.02
    return ok, (f"discrete {discrete:.5f} vs 2 pi/ln 10 = {energy:.5f} "
                f"(rel {rel:.2e}, tol 2e-2)")


def _c06_hersch() -> tuple[bool, str]:
    rng = np.random.default_rng(606)
    residuals = []
    # eight synthetic measures on the identity sphere map
    for _ in range(8):
        n = 2500
        th = np.arccos(rng.uniform(-1, 1, n))
        ph = rng.uniform(0, 2 * np.pi, n)
        pts = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph),
                        np.cos(th)], axis=-1)
        w = rng.uniform(0.2, 1.0, n) * np.exp(
            2.0 * rng.normal() * pts @ rng.standard_normal(3) /
            max(1e-9, np.linalg.norm(rng.standard_normal(3))))
        r = hersch_center(SphereSamples(pts, w, 1.0, n), weights=w)
        residuals.append(r.residual)
    # a moved Clifford torus in S^3
    cl = clifford_torus_map().samples(48)
    g = MobiusMap.dilation(1.0, np.array([0.0, 1.0, 0.0, 0.0]))
    r = hersch_center(SphereSamples(g(cl.points), cl.density, cl.cell, 48))
    residuals.append(r.residual)
    # the conical case: elliptic-map measure, map moved off center
    sm = weierstrass_sphere_map().samples(128)
    g2 = MobiusMap.dilation(0.8, np.array([0.3, 0.9, 0.3]) / np.sqrt(0.99))
    r = hersch_center(SphereSamples(g2(sm.points), sm.density, sm.cell, 128))
    residuals.append(r.residual)
    worst = max(residuals)
    # idempotence: recenter a centered configuration
    base = clifford_torus_map()
    first = hersch_center(base, resolution=48)
    again = hersch_center(base, resolution=48)
    drift = again.mobius.distance_to_identity()
    ok = worst < 1e-8 and drift < 1e-6
    return ok, (f"10 cases, worst residual {worst:.2e} (tol 1e-8); "
                f"idempotence drift {drift:.2e} (tol 1e-6)")


def _c07_teich() -> tuple[bool, str]:
    rng = np.random.default_rng(707)
    worst = 0.0
    for _ in range(100):
        a1, a2 = rng.uniform(0.0, 0.5, 2)
        b1 = rng.uniform(np.sqrt(max(0.0, 1 - a1 * a1)) + 1e-6, 2.0)
        b2 = rng.uniform(np.sqrt(max(0.0, 1 - a2 * a2)) + 1e-6, 2.0)
        m1 = TorusModulus(a1, max(b1, np.sqrt(1 - a1 * a1) + 1e-9))
        m2 = TorusModulus(a2, max(b2, np.sqrt(1 - a2 * a2) + 1e-9))
        cert = teich_distance_tori(m1, m2)
        worst = max(worst,
                    abs(cert.distance - cert.meta["hyperbolic_oracle"]))
        continuity_certificate(m1, m2)  # raises on violation
    tight = continuity_certificate(TorusModulus(0, 1), TorusModulus(0, 2))
    equality = abs(tight.slack - 1e-9) < 1e-12
    ok = worst < 1e-9 and equality
    return ok, (f"method agreement worst {worst:.2e} (tol 1e-9); "
                f"(0,1)/(0,2) slack {tight.slack:.2e} (equality case)")


def _c08_maximize() -> tuple[bool, str]:
    rep = maximize_in_class(equilateral_modulus(), opt_bandwidth=2,
                            solver_bandwidth=6, budget=2000, seed=8)
    lo, hi = 0.98 * EQUILATERAL_MAX, 1.0025 * EQUILATERAL_MAX
    in_window = lo <= rep.best_value <= hi
    over = max((v for _, v, _ in rep.trace), default=0.0)
    no_breach = over <= EQUILATERAL_MAX * 1.0025
    ok = in_window and no_breach and rep.passed
    return ok, (f"terminal {rep.best_value:.4f} in [{lo:.4f}, {hi:.4f}]: "
                f"{in_window}; max iterate {over:.4f} within 0.25% ceiling: "
                f"{no_breach}; evals {rep.evaluations}")


def _c09_stability() -> tuple[bool, str]:
    from .galerkin import density_stability_test

    square = square_modulus()
    outcomes = []
    # smooth perturbation of the flat metric
    flat = ConformalFactor.one(square)
    fam1 = lambda eps: ConformalFactor(
        square, func=lambda x, y, e=eps: 1.0 + e * np.cos(2 * np.pi * x))
    rows1 = density_stability_test(flat, fam1, [0.4, 0.2, 0.1], bandwidth=8)
    # mollified step
    step = ConformalFactor(
        square, func=lambda x, y: 1.25 + 0.25 * np.sign(np.cos(2 * np.pi * x)))
    fam2 = lambda eps: ConformalFactor(
        square,
        func=lambda x, y, e=eps: 1.25 + 0.25 * np.tanh(np.cos(2 * np.pi * x) / e))
    rows2 = density_stability_test(step, fam2, [0.3, 0.15, 0.075], bandwidth=8,
                                   resolution=128)
    # conical factor regularized from below
    sm = weierstrass_sphere_map()
    samples = sm.samples(128)
    vals = samples.density.reshape(128, 128)
    conical = ConformalFactor.from_grid(square, vals, "elliptic pullback")
    fam3 = lambda eps: ConformalFactor.from_grid(square, vals + eps,
                                                 "regularized")
    rows3 = density_stability_test(conical, fam3, [0.4, 0.2, 0.1],
                                   bandwidth=10, resolution=128)
    details = []
    ok = True
    for name, rows, lam_ref in (
            ("smooth", rows1, 4 * np.pi**2),
            ("step", rows2, None),
            ("conical", rows3, None)):
        gaps = [r["gap1"] for r in rows]
        mono = all(gaps[i] > gaps[i + 1] for i in range(len(gaps) - 1))
        ref = lam_ref or rows[-1]["lambda1"]
        final = gaps[-1] / ref
        ok = ok and mono and final < 0.01
        details.append(f"{name}: gaps {['%.2e' % g for g in gaps]} "
                       f"monotone={mono} final {final:.2e}")
    return ok, "; ".join(details)


def _c10_ceilings() -> tuple[bool, str]:
    # the guard must reject a breach beyond 1e-9 and admit values below it
    try:
        Spectrum(np.array([0.0, TORUS_CEILING + 1e-6]), area=1.0,
                 surface="torus")
        rejected = False
    except CeilingViolation:
        rejected = True
    try:
        Spectrum(np.array([0.0, TORUS_CEILING + 5e-10]), area=1.0,
                 surface="torus")
        admitted = True
    except CeilingViolation:
        admitted = False
    try:
        Spectrum(np.array([0.0, KLEIN_CEILING + 1e-6]), area=1.0,
                 surface="klein")
        rejected_k = False
    except CeilingViolation:
        rejected_k = True
    flat_ok = (flat_torus_spectrum(equilateral_modulus(), 4).lambda1_bar
               <= TORUS_CEILING)
    klein_ok = klein_g0_lambda1bar(256).lambda1bar <= KLEIN_CEILING
    ok = rejected and admitted and rejected_k and flat_ok and klein_ok
    return ok, (f"torus breach rejected: {rejected}; 5e-10 slack admitted: "
                f"{admitted}; klein breach rejected: {rejected_k}; "
                f"flat/extremal values under ceilings: {flat_ok and klein_ok}")


CRITERIA = {
    1: ("equilateral flat tone", _c01_equilateral_flat),
    2: ("extremal Klein bottle tone", _c02_klein_g0),
    3: ("degree-area invariance and strict monotonicity", _c03_degree_area),
    4: ("dilation degeneration of the elliptic pullback", _c04_degeneration),
    5: ("capacity of the log cutoff", _c05_capacity),
    6: ("conformal centering", _c06_hersch),
    7: ("Teichmueller distance and continuity bound", _c07_teich),
    8: ("in-class maximization window", _c08_maximize),
    9: ("eigenvalue stability under mollification", _c09_stability),
    10: ("topological ceilings hard-wired", _c10_ceilings),
}

#: Criteria that finish in well under a minute altogether.
QUICK_SUBSET = (1, 5, 7, 10)


def run_criterion(index: int) -> CriterionResult:
    name, fn = CRITERIA[index]
    start = time.time()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crash is a failure, not an abort
        passed, detail = False, f"exception: {exc!r}"
    return CriterionResult(index, name, bool(passed), detail,
                           time.time() - start)


def run_all(quick: bool = False, echo=None) -> list[CriterionResult]:
    indices = QUICK_SUBSET if quick else sorted(CRITERIA)
    results = []
    for i in indices:
        r = run_criterion(i)
        results.append(r)
        if echo is not None:
            echo(r.line())
    return results
