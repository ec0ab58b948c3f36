"""Flat conformal classes: lattices, moduli, and closed-form flat spectra.

A flat torus is C/Gamma for a rank-2 lattice Gamma.  Up to rotation and
scaling every such torus is C/<1, a+ib> with (a, b) in the fundamental domain

    M = {0 <= a <= 1/2,  a^2 + b^2 >= 1,  b > 0},

mirror classes identified (a ~ -a).  Flat Klein bottles are quotients of C by
the group generated by z -> z + ib and z -> conj(z) + pi; they are classified
by the translation length b > 0, with flat area pi*b.

Flat eigenvalues are 4*pi^2*|xi|^2 over the dual lattice; the Klein-bottle
spectrum is the part of the double-cover torus spectrum invariant under the
glide reflection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .spectrum import Spectrum

__all__ = [
    "Lattice",
    "TorusModulus",
    "KleinModulus",
    "DegenerateLatticeError",
    "reduce_to_fundamental_domain",
    "dual_lattice",
    "flat_torus_spectrum",
    "flat_klein_spectrum",
    "fundamental_tone_sweep",
    "equilateral_modulus",
    "square_modulus",
]


class DegenerateLatticeError(ValueError):
    """Raised when lattice generators are (numerically) collinear."""


@dataclass(frozen=True)
class Lattice:
    """Rank-2 lattice in R^2 spanned by e1 and e2 (rows of length 2)."""

    e1: np.ndarray
    e2: np.ndarray

    def __post_init__(self):
        e1 = np.asarray(self.e1, dtype=float).reshape(2)
        e2 = np.asarray(self.e2, dtype=float).reshape(2)
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)
        scale = max(np.linalg.norm(e1), np.linalg.norm(e2))
        if scale == 0.0 or abs(self.det) < 1e-12 * scale * scale:
            raise DegenerateLatticeError(
                f"generators {e1} and {e2} are collinear or zero"
            )

    @property
    def basis(self) -> np.ndarray:
        """2x2 matrix with the generators as columns."""
        return np.column_stack([self.e1, self.e2])

    @property
    def det(self) -> float:
        return float(self.e1[0] * self.e2[1] - self.e1[1] * self.e2[0])

    @property
    def orientation(self) -> int:
        return 1 if self.det > 0 else -1

    @property
    def covolume(self) -> float:
        return abs(self.det)

    def shortest_vector_norm(self) -> float:
        """Length of a shortest nonzero vector (exact for a reduced basis)."""
        reduced = _gauss_reduce(self.basis)
        return float(min(np.linalg.norm(reduced[:, 0]), np.linalg.norm(reduced[:, 1])))


@dataclass(frozen=True)
class TorusModulus:
    """Point (a, b) of the flat-torus moduli space M."""

    a: float
    b: float

    def __post_init__(self):
        tol = 1e-9
        if not (-tol <= self.a <= 0.5 + tol):
            raise ValueError(f"a = {self.a} outside [0, 1/2]")
        if not self.b > 0:
            raise ValueError(f"b = {self.b} must be positive")
        if self.a * self.a + self.b * self.b < 1.0 - 1e-9:
            raise ValueError(f"(a, b) = ({self.a}, {self.b}) has a^2+b^2 < 1")

    @property
    def tau(self) -> complex:
        return complex(self.a, self.b)

    @property
    def area(self) -> float:
        """Area of the unit-scaled torus C/<1, a+ib>."""
        return self.b

    def lattice(self) -> Lattice:
        return Lattice(np.array([1.0, 0.0]), np.array([self.a, self.b]))

    def dual_basis(self) -> np.ndarray:
        """Columns xi1, xi2 with <xi_i, e_j> = delta_ij."""
        return np.array([[1.0, 0.0], [-self.a / self.b, 1.0 / self.b]])


@dataclass(frozen=True)
class KleinModulus:
    """Flat Klein bottle parameter: translation length b of z -> z + ib."""

    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError(f"b = {self.b} must be positive")

    @property
    def area(self) -> float:
        """Flat area of the fundamental domain [0, pi] x [0, b]."""
        return np.pi * self.b

    def double_cover(self) -> Lattice:
        """Orientation double cover: the torus C/<2*pi, ib>."""
        return Lattice(np.array([2.0 * np.pi, 0.0]), np.array([0.0, self.b]))


def equilateral_modulus() -> TorusModulus:
    return TorusModulus(0.5, np.sqrt(3.0) / 2.0)


def square_modulus() -> TorusModulus:
    return TorusModulus(0.0, 1.0)


def _gauss_reduce(basis: np.ndarray, max_iter: int = 1000) -> np.ndarray:
    """Lagrange-Gauss reduction; returns a basis with |b1| <= |b2| <= |b1 +- b2|."""
    u = basis[:, 0].copy()
    v = basis[:, 1].copy()
    for _ in range(max_iter):
        if np.dot(u, u) > np.dot(v, v):
            u, v = v, u
        mu = round(np.dot(u, v) / np.dot(u, u))
        if mu == 0:
            return np.column_stack([u, v])
        v = v - mu * u
    raise RuntimeError("Gauss reduction did not terminate")


def reduce_to_fundamental_domain(lattice: Lattice) -> TorusModulus:
    """Modulus (a, b) in M of the conformal class of C/lattice.

    The class is invariant under rotation, scaling, and reflection of the
    lattice, so the result satisfies 0 <= a <= 1/2, a^2 + b^2 >= 1, b > 0.
    """
    reduced = _gauss_reduce(lattice.basis)
    w1 = complex(reduced[0, 0], reduced[1, 0])
    w2 = complex(reduced[0, 1], reduced[1, 1])
    tau = w2 / w1
    if tau.imag < 0:
        tau = -tau  # -w2 generates the same lattice
    # Gauss reduction already gives |Re tau| <= 1/2 and |tau| >= 1 up to
    # roundoff; renormalize defensively and fold the mirror identification.
    tau -= round(tau.real)
    if abs(tau) < 1.0 - 1e-12:
        tau = -1.0 / tau
        tau -= round(tau.real)
    a = abs(tau.real)
    if a < 1e-15:
        a = 0.0
    if abs(a - 0.5) < 1e-15:
        a = 0.5
    return TorusModulus(a, tau.imag)


def dual_lattice(lattice: Lattice) -> Lattice:
    """Lattice of xi with <xi, gamma> integral for all gamma (inverse transpose)."""
    dual_basis = np.linalg.inv(lattice.basis).T
    return Lattice(dual_basis[:, 0], dual_basis[:, 1])


def _enumerated_norms(dual_basis: np.ndarray, count: int) -> np.ndarray:
    """Sorted |xi|^2 over the dual lattice, guaranteed complete for `count`.

    Enumerates the index box |p|, |q| <= R and keeps norms inside the largest
    ball certain to be covered by the box; R doubles until that ball holds at
    least 2*count + 1 points, so no short vector can be missed.
    """
    sigma_min = np.linalg.svd(dual_basis, compute_uv=False)[-1]
    radius = 2
    while True:
        rng = np.arange(-radius, radius + 1)
        p, q = np.meshgrid(rng, rng, indexing="ij")
        vecs = dual_basis @ np.stack([p.ravel(), q.ravel()])
        norms2 = np.einsum("ij,ij->j", vecs, vecs)
        safe = norms2 <= (radius * sigma_min) ** 2 + 1e-12
        if np.count_nonzero(safe) >= 2 * count + 1:
            return np.sort(norms2[safe])
        radius *= 2


def flat_torus_spectrum(m: TorusModulus, count: int) -> Spectrum:
    """First `count` flat eigenvalues of C/<1, a+ib>, area b.

    Eigenvalues are 4*pi^2*|xi|^2, xi ranging over the dual lattice.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    norms2 = _enumerated_norms(m.dual_basis(), count)
    eigenvalues = 4.0 * np.pi**2 * norms2[:count]
    return Spectrum(eigenvalues, area=m.area, surface="torus",
                    meta={"modulus": (m.a, m.b), "metric": "flat"})


def _klein_flat_eigenvalues(b: float, count: int) -> np.ndarray:
    """Glide-invariant eigenvalues of the double-cover torus C/<2pi, ib>.

    Basis exp(i*m*x + 2*pi*i*n*y/b); the glide z -> conj(z) + pi sends it to
    (-1)^m exp(i*m*x - 2*pi*i*n*y/b), so each (m, n != 0) pair contributes one
    invariant combination and n = 0 survives iff m is even.
    """
    step = 2.0 * np.pi / b
    m_max = 2
    n_max = 2
    while True:
        vals = []
        for mm in range(-m_max, m_max + 1):
            if mm % 2 == 0:
                vals.append(float(mm * mm))  # n = 0, m even
            for nn in range(1, n_max + 1):
                vals.append(mm * mm + (step * nn) ** 2)
        vals = np.sort(np.array(vals))
        # complete below the smaller of the two box limits
        cutoff = min(m_max**2, (step * n_max) ** 2)
        safe = vals[vals <= cutoff + 1e-12]
        if safe.size >= 2 * count + 1:
            return safe
        m_max *= 2
        n_max *= 2


def flat_klein_spectrum(m: KleinModulus, count: int) -> Spectrum:
    """First `count` eigenvalues of the flat Klein bottle K_b, area pi*b."""
    if count < 1:
        raise ValueError("count must be >= 1")
    vals = _klein_flat_eigenvalues(m.b, count)
    return Spectrum(vals[:count], area=m.area, surface="klein",
                    meta={"modulus": m.b, "metric": "flat"})


def fundamental_tone_sweep(moduli) -> list[dict]:
    """Per-modulus flat lambda1*area over a finite grid of moduli.

    Accepts TorusModulus and KleinModulus entries (mixed allowed).  Rows gain
    a `decaying` flag marking entries where the normalized tone has started a
    monotone decay relative to the previous same-kind entry.
    """
    rows: list[dict] = []
    last_by_kind: dict[str, float] = {}
    for m in moduli:
        if isinstance(m, TorusModulus):
            spec = flat_torus_spectrum(m, 2)
            row = {"kind": "torus", "a": m.a, "b": m.b}
        elif isinstance(m, KleinModulus):
            spec = flat_klein_spectrum(m, 2)
            row = {"kind": "klein", "b": m.b}
        else:
            raise TypeError(f"unsupported modulus {m!r}")
        row.update(area=spec.area, lambda1=spec.lambda1,
                   lambda1bar=spec.lambda1_bar)
        prev = last_by_kind.get(row["kind"])
        row["decaying"] = prev is not None and row["lambda1bar"] < prev - 1e-12
        last_by_kind[row["kind"]] = row["lambda1bar"]
        rows.append(row)
    return rows


def modular_orbit_moduli(m: TorusModulus, radius: int = 5):
    """Moduli of re-marked lattices (small GL(2,Z) words); testing utility.

    Every element must reduce back to m; used as a brute-force oracle for
    `reduce_to_fundamental_domain`.
    """
    basis = m.lattice().basis
    out = []
    span = range(-radius, radius + 1)
    for a, b, c, d in itertools.product(span, repeat=4):
        if a * d - b * c in (1, -1):
            out.append(Lattice(basis @ np.array([a, c]), basis @ np.array([b, d])))
    return out
