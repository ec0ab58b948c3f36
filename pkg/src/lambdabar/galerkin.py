"""Fourier-Galerkin solver for Delta u = lambda f u on flat tori and Klein
bottles.

The trial space is spanned by dual-lattice characters, where the Dirichlet
form is exactly diagonal (conformal invariance keeps the numerator on the
flat background); the density f enters only through its Fourier coefficients,
computed by FFT on a midpoint grid whose resolution is at least four times
the bandwidth so that no retained mass entry is aliased.  Klein bottles use
the glide-invariant part of the double-cover torus basis, so the assembler is
reused unchanged.

Eigenvalues decrease monotonically in the bandwidth (nested trial spaces) and
overshoot the true values from above, so every reported lambda1*area is
checked against the topological ceilings on construction of the Spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lattices import KleinModulus, TorusModulus
from .spectrum import CLUSTER_RTOL, Spectrum

__all__ = [
    "ConformalFactor",
    "GalerkinProblem",
    "EigenSolution",
    "AliasingError",
    "assemble",
    "eigenvalues",
    "density_stability_test",
    "weyl_sanity",
    "WeylDiagnostic",
]


class AliasingError(RuntimeError):
    """Mass matrix lost positivity beyond roundoff: raise the resolution."""


def midpoint_grid(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes of the unit square, shape (n, n) each (ij indexing)."""
    s = (np.arange(n) + 0.5) / n
    return np.meshgrid(s, s, indexing="ij")


@dataclass
class ConformalFactor:
    """Nonnegative density f over a flat torus or Klein bottle.

    The density is stored either as a callable on ambient coordinates (x, y)
    or as midpoint-grid samples in lattice coordinates.  Zeros are allowed on
    a finite set (conical points); the mass must stay positive.
    """

    base: TorusModulus | KleinModulus
    func: object = None
    values: np.ndarray = None
    cone_points: list = None
    description: str = ""

    def __post_init__(self):
        if (self.func is None) == (self.values is None):
            raise ValueError("provide exactly one of func/values")
        if self.values is not None:
            v = np.asarray(self.values, dtype=float)
            if v.ndim != 2 or v.shape[0] != v.shape[1]:
                raise ValueError("grid samples must be square")
            if v.min() < -1e-12 * max(1.0, v.max()):
                raise ValueError("density must be nonnegative")
            object.__setattr__(self, "values", v)

    @classmethod
    def one(cls, base) -> "ConformalFactor":
        return cls(base, func=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
                   description="flat")

    @classmethod
    def from_grid(cls, base, values, description="grid") -> "ConformalFactor":
        return cls(base, values=np.asarray(values, dtype=float),
                   description=description)

    @property
    def surface(self) -> str:
        return "klein" if isinstance(self.base, KleinModulus) else "torus"

    def cover_lattice_basis(self) -> np.ndarray:
        """Columns e1, e2 of the sampling torus (the double cover for Klein)."""
        if isinstance(self.base, KleinModulus):
            return np.array([[2.0 * np.pi, 0.0], [0.0, self.base.b]])
        m = self.base
        return np.array([[1.0, m.a], [0.0, m.b]])

    def flat_area(self) -> float:
        """Area of the surface under the flat background metric."""
        basis = self.cover_lattice_basis()
        cover = abs(np.linalg.det(basis))
        return cover / 2.0 if self.surface == "klein" else cover

    def sample(self, n: int) -> np.ndarray:
        """Midpoint-grid samples in lattice coordinates of the (cover) torus."""
        if self.values is not None:
            if self.values.shape[0] != n:
                raise ValueError(
                    f"stored grid resolution {self.values.shape[0]} != {n}; "
                    "grid factors are used at their own resolution")
            return self.values
        s, t = midpoint_grid(n)
        basis = self.cover_lattice_basis()
        x = basis[0, 0] * s + basis[0, 1] * t
        y = basis[1, 0] * s + basis[1, 1] * t
        vals = np.asarray(self.func(x, y), dtype=float)
        if vals.min() < -1e-12 * max(1.0, vals.max()):
            raise ValueError("density must be nonnegative")
        return vals

    def fourier_table(self, n: int) -> np.ndarray:
        """True Fourier coefficients F[u, v] (FFT layout, midpoint corrected).

        F(u, v) = integral over the unit square of f(s, t) e^{-2 pi i(us+vt)},
        exact for band-limited f up to |u|, |v| < n/2.  A stored grid factor
        is always transformed at its own (finer or equal) resolution.
        """
        if self.values is not None:
            if self.values.shape[0] < n:
                raise ValueError(
                    f"stored grid ({self.values.shape[0]}) coarser than the "
                    f"required resolution {n}")
            vals = self.values
        else:
            vals = self.sample(n)
        m = vals.shape[0]
        raw = np.fft.fft2(vals) / m**2
        freq = np.fft.fftfreq(m, d=1.0 / m)  # signed frequencies in FFT layout
        phase = np.exp(-1j * np.pi * freq / m)
        return raw * phase[:, None] * phase[None, :]

    def mass(self, n: int = 128) -> float:
        """Total measure integral f dV over the surface."""
        vals = self.values if self.values is not None else self.sample(n)
        return float(np.mean(vals)) * self.flat_area()


def _torus_indices(bandwidth: int) -> np.ndarray:
    rng = np.arange(-bandwidth, bandwidth + 1)
    p, q = np.meshgrid(rng, rng, indexing="ij")
    return np.stack([p.ravel(), q.ravel()], axis=1)


@dataclass
class GalerkinProblem:
    """Assembled pencil (stiffness, mass) over a trial space of characters."""

    factor: ConformalFactor
    bandwidth: int
    resolution: int
    stiffness: np.ndarray  # diagonal entries
    mass: np.ndarray       # Hermitian
    mass_total: float      # integral of f over the surface
    indices: np.ndarray    # (dim, 2) character indices (cover indices for Klein)
    symmetrizer: np.ndarray = None  # Klein only: cover-basis expansion of the trial space
    cover_indices: np.ndarray = None

    @property
    def dim(self) -> int:
        return self.stiffness.size

    @property
    def surface(self) -> str:
        return self.factor.surface

    def solve(self, count: int) -> "EigenSolution":
        if count < 1:
            raise ValueError("count must be >= 1")
        count = min(count, self.dim)
        kmat = np.diag(self.stiffness).astype(complex)
        try:
            if count <= self.dim // 4:
                vals, vecs = scipy.linalg.eigh(
                    kmat, self.mass, subset_by_index=[0, count - 1], driver="gvx")
            else:
                vals, vecs = scipy.linalg.eigh(kmat, self.mass)
                vals, vecs = vals[:count], vecs[:, :count]
        except scipy.linalg.LinAlgError:
            vals, vecs = self._solve_filtered(count)
        vals = vals.copy()
        # the constant mode is exact up to roundoff; clamp it
        if abs(vals[0]) < 1e-8 * max(1.0, abs(vals[-1])):
            vals[0] = 0.0
        if np.any(vals[1:] < -1e-8):
            raise AliasingError(
                "negative eigenvalues from an indefinite mass matrix; "
                "raise the assembly resolution")
        return EigenSolution(np.maximum(vals, 0.0), vecs, self)

    def _solve_filtered(self, count: int):
        # fallback for a numerically singular mass: restrict to its positive
        # spectral subspace (deflates near-null directions, then a standard
        # symmetric solve)
        mvals, mvecs = scipy.linalg.eigh(self.mass)
        keep = mvals > 1e-12 * mvals.max()
        if not np.any(keep):
            raise AliasingError("mass matrix is numerically zero")
        basis = mvecs[:, keep] / np.sqrt(mvals[keep])
        reduced = basis.conj().T @ (self.stiffness[:, None] * basis)
        vals, vecs = scipy.linalg.eigh(reduced)
        return vals[:count], basis @ vecs[:, :count]

    def spectrum(self, count: int) -> Spectrum:
        sol = self.solve(count)
        return sol.spectrum()


@dataclass
class EigenSolution:
    """Generalized eigenpairs, mass-orthonormal, ascending."""

    values: np.ndarray
    vectors: np.ndarray
    problem: GalerkinProblem

    def spectrum(self) -> Spectrum:
        base = self.problem.factor.base
        modulus = (base.b if isinstance(base, KleinModulus)
                   else (base.a, base.b))
        meta = {
            "modulus": modulus,
            "bandwidth": self.problem.bandwidth,
            "resolution": self.problem.resolution,
            "factor": self.problem.factor.description,
        }
        vals = self.values
        if _corruption_enabled():
            vals = vals * 1.05  # test hook: see cli.verify docs
        if vals.size > 1 and 0.0 < vals[1] < 1e-6 * max(1.0, vals[-1]):
            import warnings

            warnings.warn("near-zero eigenvalue cluster: the constant mode "
                          "is not isolated (disconnected measure?)")
        return Spectrum(vals, area=self.problem.mass_total,
                        surface=self.problem.surface, meta=meta)

    def lambda1(self) -> float:
        spec = self.spectrum()
        lam = spec.lambda1
        if lam is None:
            raise RuntimeError("no positive eigenvalue computed; raise count")
        return lam

    def cluster_of_lambda1(self, rtol: float = CLUSTER_RTOL) -> np.ndarray:
        """Indices of the eigenvalue cluster containing lambda1."""
        lam = self.lambda1()
        return np.nonzero(np.abs(self.values - lam) <= rtol * lam)[0]

    def eigenfunction_grid(self, k: int, n: int = None) -> np.ndarray:
        """Values of the k-th eigenfunction on the midpoint sampling grid."""
        prob = self.problem
        n = n or prob.resolution
        coeff = self.vectors[:, k]
        if prob.symmetrizer is not None:
            coeff = prob.symmetrizer @ coeff
            idx = prob.cover_indices
        else:
            idx = prob.indices
        spec = np.zeros((n, n), dtype=complex)
        spec[idx[:, 0] % n, idx[:, 1] % n] = coeff
        freq = np.fft.fftfreq(n, d=1.0 / n)
        phase = np.exp(1j * np.pi * freq / n)  # shift onto midpoint nodes
        spec *= phase[:, None] * phase[None, :]
        return np.fft.ifft2(spec) * n**2


def _corruption_enabled() -> bool:
    import os

    return bool(os.environ.get("LAMBDABAR_CORRUPT_SOLVER"))


def _coefficient(table: np.ndarray, du: int, dv: int) -> complex:
    # |offset| = n/2 lands on the shared Nyquist bin: tolerable for smooth f,
    # anything beyond is an aliasing bug
    n = table.shape[0]
    if not (abs(du) <= n // 2 and abs(dv) <= n // 2):
        raise AliasingError(f"frequency offset ({du},{dv}) aliased at resolution {n}")
    return table[du % n, dv % n]


def assemble(factor: ConformalFactor, bandwidth: int,
             resolution: int = None) -> GalerkinProblem:
    """Build the Galerkin pencil of Delta u = lambda f u at a given bandwidth.

    The mass entry between characters xi and eta is the Fourier coefficient
    of f at xi - eta; the sampling resolution defaults to max(4*bandwidth, 32)
    and must exceed 4*bandwidth to keep those coefficients alias-free.
    """
    if bandwidth < 1:
        raise ValueError("bandwidth must be >= 1")
    n = resolution or max(4 * bandwidth, 32)
    if factor.values is not None:
        n = max(n, factor.values.shape[0])
    if n < 4 * bandwidth:
        raise ValueError("resolution below 4x bandwidth invites aliasing")
    table = factor.fourier_table(n)
    n = table.shape[0]
    basis = factor.cover_lattice_basis()
    dual = np.linalg.inv(basis).T  # columns xi1, xi2

    if factor.surface == "torus":
        idx = _torus_indices(bandwidth)
        vecs = idx @ dual.T
        stiffness = 4.0 * np.pi**2 * np.einsum("ij,ij->i", vecs, vecs)
        dim = idx.shape[0]
        mass = np.empty((dim, dim), dtype=complex)
        for i in range(dim):
            dp = idx[i, 0] - idx[:, 0]
            dq = idx[i, 1] - idx[:, 1]
            mass[i, :] = table[dp % n, dq % n]
        mass = 0.5 * (mass + mass.conj().T)
        mass_total = factor.flat_area() * float(table[0, 0].real)
        _check_positivity(mass)
        return GalerkinProblem(factor, bandwidth, n, stiffness, mass,
                               mass_total, idx)

    # Klein bottle: glide-invariant combinations of cover characters.
    # glide: s -> s + 1/2, t -> -t, i.e. e_{m,n} -> (-1)^m e_{m,-n}
    _check_glide_invariance(table, bandwidth, n)
    cover_idx = _torus_indices(bandwidth)
    pos = {tuple(mn): i for i, mn in enumerate(cover_idx)}
    columns = []
    members = []
    for m in range(-bandwidth, bandwidth + 1):
        if m % 2 == 0:
            columns.append([(pos[(m, 0)], 1.0)])
            members.append((m, 0))
        for nn in range(1, bandwidth + 1):
            sgn = -1.0 if m % 2 else 1.0
            columns.append([(pos[(m, nn)], 1 / np.sqrt(2)),
                            (pos[(m, -nn)], sgn / np.sqrt(2))])
            members.append((m, nn))
    sym = np.zeros((cover_idx.shape[0], len(columns)))
    for j, col in enumerate(columns):
        for i, w in col:
            sym[i, j] = w
    vecs = cover_idx @ dual.T
    cover_stiff = 4.0 * np.pi**2 * np.einsum("ij,ij->i", vecs, vecs)
    dimc = cover_idx.shape[0]
    cover_mass = np.empty((dimc, dimc), dtype=complex)
    for i in range(dimc):
        dp = cover_idx[i, 0] - cover_idx[:, 0]
        dq = cover_idx[i, 1] - cover_idx[:, 1]
        cover_mass[i, :] = table[dp % n, dq % n]
    mass = sym.T @ cover_mass @ sym
    mass = 0.5 * (mass + mass.conj().T)
    stiffness = np.einsum("ij,i,ij->j", sym, cover_stiff, sym)
    mass_total = factor.flat_area() * float(table[0, 0].real)
    _check_positivity(mass)
    return GalerkinProblem(factor, bandwidth, n, stiffness, mass, mass_total,
                           np.array(members), symmetrizer=sym,
                           cover_indices=cover_idx)


def _check_positivity(mass: np.ndarray) -> None:
    trace = float(np.real(np.trace(mass))) / mass.shape[0]
    low = scipy.linalg.eigvalsh(mass, subset_by_index=[0, 0])[0]
    if low < -1e-10 * max(trace, 1.0):
        raise AliasingError(
            f"mass matrix indefinite (lowest eigenvalue {low:.3e}); "
            "raise the assembly resolution")


def _check_glide_invariance(table: np.ndarray, bandwidth: int, n: int) -> None:
    scale = abs(table[0, 0]) or 1.0
    for m in range(-2 * bandwidth, 2 * bandwidth + 1):
        for nn in range(0, 2 * bandwidth + 1):
            a = _coefficient(table, m, nn)
            b = _coefficient(table, m, -nn) * (-1) ** m
            if abs(a - b) > 1e-8 * scale:
                raise ValueError(
                    "density is not glide-invariant: coefficient "
                    f"({m},{nn}) mismatch {abs(a - b):.3e}")


def eigenvalues(problem: GalerkinProblem, count: int) -> Spectrum:
    """Smallest `count` eigenvalues of the assembled pencil, as a Spectrum."""
    return problem.spectrum(count)


def density_stability_test(factor: ConformalFactor, family, scales,
                           bandwidth: int = 8, count: int = 3,
                           resolution: int = None) -> list[dict]:
    """Eigenvalue drift under density mollification.

    `family(eps)` must return the mollified ConformalFactor; the table rows
    report |lambda_k(f_eps) - lambda_k(f)| for k = 1..count-1 per scale.
    """
    base = assemble(factor, bandwidth, resolution).solve(count + 1)
    ref = base.values
    rows = []
    for eps in scales:
        pert = assemble(family(eps), bandwidth, resolution).solve(count + 1)
        gaps = np.abs(pert.values[1:count + 1] - ref[1:count + 1])
        rows.append({
            "eps": float(eps),
            "lambda1": float(pert.values[1]),
            "gaps": gaps.tolist(),
            "gap1": float(gaps[0]),
        })
    return rows


@dataclass
class WeylDiagnostic:
    slope: float
    expected: float
    ratio: float
    ok: bool
    count: int


def weyl_sanity(spectrum: Spectrum, rtol: float = 0.15) -> WeylDiagnostic:
    """Counting-function slope against area/(4 pi); needs >= 50 eigenvalues."""
    ev = np.asarray(spectrum.eigenvalues)
    if ev.size < 50:
        raise ValueError("need at least 50 eigenvalues for a Weyl check")
    counts = np.arange(1, ev.size + 1, dtype=float)
    slope = np.polyfit(ev, counts, 1)[0]
    expected = spectrum.area / (4.0 * np.pi)
    ratio = slope / expected
    return WeylDiagnostic(float(slope), float(expected), float(ratio),
                          bool(abs(ratio - 1.0) <= rtol), ev.size)
