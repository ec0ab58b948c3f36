"""Dilatation, Teichmueller distance on flat moduli, and eigenvalue-ratio
certificates.

For linear maps of the plane the dilatation is the singular-value ratio
K = s_max/s_min; the distance between flat-torus classes is half the log of
the minimal K over affine maps matching the lattices up to re-marking, which
coincides with half the hyperbolic distance between the period ratios modulo
the modular group.  Both are computed independently and cross-checked.  A
quasiconformal map of dilatation K distorts Rayleigh quotients by at most K,
so normalized tones of conformal classes satisfy

    |log lb1(m2) - log lb1(m1)| <= 2 d_T(m1, m2),

which the certificate asserts with the solver's error budget.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .lattices import KleinModulus, TorusModulus, flat_klein_spectrum, flat_torus_spectrum

__all__ = [
    "dilatation",
    "teich_distance_tori",
    "teich_distance_klein",
    "TeichCertificate",
    "continuity_certificate",
    "hyperbolic_distance",
]


def dilatation(linear: np.ndarray) -> float:
    """Singular-value ratio of a 2x2 real matrix; 1 iff it is a similarity.

    Orientation-reversing inputs are folded in by pre-composing with a
    reflection, which leaves the singular values unchanged.
    """
    m = np.asarray(linear, dtype=float).reshape(2, 2)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(det) < 1e-14 * max(1.0, float(np.abs(m).max()) ** 2):
        raise ValueError("degenerate map has no dilatation")
    smax, smin = np.linalg.svd(m, compute_uv=False)
    return float(smax / smin)


def hyperbolic_distance(z: complex, w: complex) -> float:
    """Upper-half-plane distance arccosh(1 + |z-w|^2/(2 Im z Im w))."""
    z, w = complex(z), complex(w)
    if z.imag <= 0 or w.imag <= 0:
        raise ValueError("points must lie in the upper half-plane")
    val = 1.0 + abs(z - w) ** 2 / (2.0 * z.imag * w.imag)
    return float(np.arccosh(val))


def _unimodular_matrices(radius: int) -> np.ndarray:
    """All integer 2x2 matrices with |entries| <= radius and det = +-1."""
    rng = np.arange(-radius, radius + 1)
    a, b, c, d = np.meshgrid(rng, rng, rng, rng, indexing="ij")
    det = a * d - b * c
    keep = np.abs(det) == 1
    return np.stack([a[keep], b[keep], c[keep], d[keep]], axis=1)


_UNIMODULAR_CACHE: dict[int, np.ndarray] = {}


def _unimodular(radius: int) -> np.ndarray:
    if radius not in _UNIMODULAR_CACHE:
        _UNIMODULAR_CACHE[radius] = _unimodular_matrices(radius)
    return _UNIMODULAR_CACHE[radius]


def _lattice_basis(m: TorusModulus) -> np.ndarray:
    return np.array([[1.0, m.a], [0.0, m.b]])


def _min_dilatation_matrix_search(m1: TorusModulus, m2: TorusModulus,
                                  radius: int) -> tuple[float, np.ndarray]:
    """min K over affine maps b2 @ U @ b1^{-1}, U integral with det +-1."""
    b1_inv = np.linalg.inv(_lattice_basis(m1))
    b2 = _lattice_basis(m2)
    u = _unimodular(radius)
    # batch 2x2 products: L = b2 @ U @ b1inv
    mats = np.einsum("ij,njk,kl->nil", b2, u.reshape(-1, 2, 2), b1_inv)
    # singular values of 2x2 batch in closed form
    e = np.einsum("nij,nij->n", mats, mats)
    det = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
    disc = np.sqrt(np.maximum(e * e - 4.0 * det * det, 0.0))
    smax2 = (e + disc) / 2.0
    smin2 = (e - disc) / 2.0
    k = np.sqrt(smax2 / np.maximum(smin2, 1e-300))
    i = int(np.argmin(k))
    return float(k[i]), mats[i]


def _min_hyperbolic_distance(m1: TorusModulus, m2: TorusModulus,
                             radius: int) -> float:
    """min over the modular orbit (and the mirror) of d_hyp(tau1, g tau2)."""
    tau1 = m1.tau
    u = _unimodular(radius)
    sl = u[u[:, 0] * u[:, 3] - u[:, 1] * u[:, 2] == 1]
    best = np.inf
    for tau2 in (m2.tau, complex(-m2.a, m2.b)):
        num = sl[:, 0] * tau2 + sl[:, 1]
        den = sl[:, 2] * tau2 + sl[:, 3]
        img = num / den
        good = img.imag > 0
        vals = 1.0 + np.abs(tau1 - img[good]) ** 2 / (
            2.0 * tau1.imag * img[good].imag)
        if vals.size:
            best = min(best, float(np.min(np.arccosh(vals))))
    return best


@dataclass
class TeichCertificate:
    """Distance certificate between two flat conformal classes."""

    m1: object
    m2: object
    distance: float
    dilatation: float
    extremal_matrix: np.ndarray = None
    lambda1bar_1: float = None
    lambda1bar_2: float = None
    bound: float = None        # e^{2 d_T} ratio bound
    slack: float = None        # bound - |log ratio|
    passed: bool = None
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def enc(m):
            if isinstance(m, TorusModulus):
                return {"a": m.a, "b": m.b}
            if isinstance(m, KleinModulus):
                return {"b": m.b}
            return m
        return {
            "m1": enc(self.m1), "m2": enc(self.m2),
            "dT": self.distance, "K": self.dilatation,
            "lambda1bar_1": self.lambda1bar_1,
            "lambda1bar_2": self.lambda1bar_2,
            "bound": self.bound, "slack": self.slack, "pass": self.passed,
            **self.meta,
        }


def teich_distance_tori(m1: TorusModulus, m2: TorusModulus,
                        radius: int = 10, cross_check: bool = True,
                        tol: float = 1e-9) -> TeichCertificate:
    """Teichmueller distance between flat-torus classes, two independent ways.

    The affine matrix search over re-markings and the hyperbolic-orbit
    minimum must agree to `tol`; an unstable minimum at the search boundary
    retries once with a doubled radius before failing.
    """
    for r in (radius, 2 * radius):
        k, mat = _min_dilatation_matrix_search(m1, m2, r)
        d_matrix = 0.5 * np.log(k)
        if not cross_check:
            return TeichCertificate(m1, m2, d_matrix, k, mat)
        d_hyp = 0.5 * _min_hyperbolic_distance(m1, m2, r)
        if abs(d_matrix - d_hyp) <= tol:
            cert = TeichCertificate(m1, m2, d_matrix, k, mat)
            cert.meta["hyperbolic_oracle"] = d_hyp
            return cert
    raise RuntimeError(
        f"matrix search ({d_matrix}) and hyperbolic oracle ({d_hyp}) "
        f"disagree beyond {tol} after radius doubling")


def teich_distance_klein(b1: KleinModulus | float, b2: KleinModulus | float
                         ) -> TeichCertificate:
    """Klein-bottle class distance via the glide-equivariant affine stretch.

    The extremal map lifts to (x, y) -> (x, (b2/b1) y) on the double covers,
    which commutes with the glide, so d_T = |log(b2/b1)|/2.
    """
    k1 = b1 if isinstance(b1, KleinModulus) else KleinModulus(float(b1))
    k2 = b2 if isinstance(b2, KleinModulus) else KleinModulus(float(b2))
    ratio = k2.b / k1.b
    k = max(ratio, 1.0 / ratio)
    mat = np.array([[1.0, 0.0], [0.0, ratio]])
    return TeichCertificate(k1, k2, 0.5 * abs(np.log(ratio)), k, mat)


def continuity_certificate(m1, m2, eps_solver: float = 1e-9,
                           lambda1bars: tuple = None) -> TeichCertificate:
    """Assert |log lb1(m2) - log lb1(m1)| <= 2 d_T + eps for flat tones.

    `lambda1bars` overrides the closed-form flat values (e.g. with optimizer
    outputs, paired with a looser eps_solver).  Violation raises: the bound
    is a theorem, so failure falsifies an implementation component.
    """
    if isinstance(m1, TorusModulus) != isinstance(m2, TorusModulus):
        raise TypeError("moduli must be of the same kind")
    if isinstance(m1, TorusModulus):
        cert = teich_distance_tori(m1, m2)
        if lambda1bars is None:
            lb1 = flat_torus_spectrum(m1, 4).lambda1_bar
            lb2 = flat_torus_spectrum(m2, 4).lambda1_bar
        else:
            lb1, lb2 = lambda1bars
    else:
        cert = teich_distance_klein(m1, m2)
        if lambda1bars is None:
            lb1 = flat_klein_spectrum(m1, 4).lambda1_bar
            lb2 = flat_klein_spectrum(m2, 4).lambda1_bar
        else:
            lb1, lb2 = lambda1bars
    log_ratio = abs(np.log(lb2) - np.log(lb1))
    bound = 2.0 * cert.distance + eps_solver
    cert.lambda1bar_1 = lb1
    cert.lambda1bar_2 = lb2
    cert.bound = bound
    cert.slack = bound - log_ratio
    cert.passed = bool(log_ratio <= bound)
    if not cert.passed:
        raise AssertionError(
            f"continuity bound violated: |log ratio| = {log_ratio:.3e} > "
            f"2 d_T + eps = {bound:.3e} for {m1} vs {m2}")
    return cert
