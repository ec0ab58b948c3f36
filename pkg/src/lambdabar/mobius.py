"""Conformal group of the round n-sphere and renormalization machinery.

A conformal automorphism of S^n is represented by a time-orientation
preserving Lorentz matrix acting on the light cone {(1, p) : p in S^n}; the
group law is matrix multiplication and the conformal scale of the pullback
metric at p is 1/(time component of L(1, p)).  Every element factors as
rotation composed with a pure dilation gamma_t^a (a boost of rapidity t
toward the axis a); the factorization is the Euclidean polar decomposition,
which stays inside the Lorentz group.

The dilation flow gamma_t^a moves points along great circles toward a, fixes
+-a, and strictly shrinks the pulled-back area of any immersed surface whose
image is not an equatorial 2-sphere; for meromorphic maps to S^2 the area is
pinned at 4*pi*degree.  Sphere maps carry their sampling: points on the
sphere, the conformal density against the flat chart of their domain torus,
and the cell measure, which is all the quadrature needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import quad

from .elliptic import WeierstrassP, sphere_pullback_factor, stereographic_to_sphere
from .galerkin import ConformalFactor, assemble, midpoint_grid
from .lattices import Lattice, TorusModulus, square_modulus

__all__ = [
    "MobiusMap",
    "SphereMap",
    "SphereSamples",
    "weierstrass_sphere_map",
    "clifford_torus_map",
    "center_of_mass",
    "hersch_center",
    "HerschResult",
    "conformal_area",
    "area_monotonicity_trace",
    "capacity_profile",
    "CapacityProfile",
    "mobius_degeneration_study",
]


@dataclass(frozen=True)
class MobiusMap:
    """Conformal automorphism of S^n as a Lorentz matrix (time coordinate first)."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", mat)
        n2 = mat.shape[0]
        eta = np.diag([-1.0] + [1.0] * (n2 - 1))
        err = np.max(np.abs(mat.T @ eta @ mat - eta))
        scale = float(np.max(np.abs(mat))) ** 2  # defect grows with the entries
        if err > 1e-9 * max(1.0, scale):
            raise ValueError(f"matrix is not Lorentz (defect {err:.2e})")
        if mat[0, 0] <= 0:
            raise ValueError("time orientation must be preserved")

    @classmethod
    def identity(cls, n: int) -> "MobiusMap":
        return cls(np.eye(n + 2))

    @classmethod
    def dilation(cls, t: float, axis: np.ndarray) -> "MobiusMap":
        """gamma_t^a: flow by time t toward the unit vector a (boost)."""
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        n1 = a.size
        mat = np.eye(n1 + 1)
        mat[0, 0] = np.cosh(t)
        mat[0, 1:] = np.sinh(t) * a
        mat[1:, 0] = np.sinh(t) * a
        mat[1:, 1:] = np.eye(n1) + (np.cosh(t) - 1.0) * np.outer(a, a)
        return cls(mat)

    @classmethod
    def rotation(cls, r: np.ndarray) -> "MobiusMap":
        r = np.asarray(r, dtype=float)
        mat = np.eye(r.shape[0] + 1)
        mat[1:, 1:] = r
        return cls(mat)

    @property
    def dim(self) -> int:
        """Dimension n of the sphere acted on."""
        return self.matrix.shape[0] - 2

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Apply to points of S^n, shape (..., n+1)."""
        p = np.asarray(points, dtype=float)
        lifted = np.concatenate([np.ones(p.shape[:-1] + (1,)), p], axis=-1)
        image = lifted @ self.matrix.T
        # overflowed maps yield nan/inf here; callers guard finiteness
        with np.errstate(invalid="ignore", divide="ignore"):
            return image[..., 1:] / image[..., :1]

    def conformal_scale(self, points: np.ndarray) -> np.ndarray:
        """e^f with (pullback metric) = e^{2f} g_can, evaluated at the points."""
        p = np.asarray(points, dtype=float)
        lifted = np.concatenate([np.ones(p.shape[:-1] + (1,)), p], axis=-1)
        return 1.0 / (lifted @ self.matrix.T)[..., 0]

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        """self after other."""
        return MobiusMap(self.matrix @ other.matrix)

    def inverse(self) -> "MobiusMap":
        eta = np.diag([-1.0] + [1.0] * (self.matrix.shape[0] - 1))
        return MobiusMap(eta @ self.matrix.T @ eta)

    def decompose(self) -> tuple[np.ndarray, float, np.ndarray]:
        """Factor as rotation @ dilation: returns (rotation, t, axis).

        The polar decomposition of a Lorentz matrix has a symmetric positive
        factor which is exactly a boost, and an orthogonal factor fixing the
        time axis, i.e. a rotation of the sphere.
        """
        gram = self.matrix.T @ self.matrix
        vals, vecs = np.linalg.eigh(gram)
        # Gram spectrum is {e^{2t}, e^{-2t}, 1, ...}; clamp roundoff negatives
        boost = (vecs * np.sqrt(np.maximum(vals, 1e-300))) @ vecs.T
        t = float(np.arccosh(max(boost[0, 0], 1.0)))
        if np.sinh(t) > 1e-12:
            axis = boost[1:, 0] / np.sinh(t)
            axis = axis / np.linalg.norm(axis)
        else:
            axis = np.zeros(self.matrix.shape[0] - 1)
            axis[0] = 1.0
            t = 0.0
        inv_boost = MobiusMap.dilation(-t, axis).matrix  # closed-form inverse
        rot = self.matrix @ inv_boost
        return rot[1:, 1:], t, axis

    def renormalized(self) -> "MobiusMap":
        """Reproject onto the Lorentz group (rebuild from the factorization)."""
        rot, t, axis = self.decompose()
        u, _, vt = np.linalg.svd(rot)
        return MobiusMap.rotation(u @ vt).compose(MobiusMap.dilation(t, axis))

    def distance_to_identity(self) -> float:
        return float(np.max(np.abs(self.matrix - np.eye(self.matrix.shape[0]))))


def disk_automorphism_rapidity(t: float) -> float:
    """Rapidity of the dilation matching (z + it)/(1 - itz), t in [0, 1)."""
    if not 0.0 <= t < 1.0:
        raise ValueError("t must lie in [0, 1)")
    return float(np.log((1.0 + t) / (1.0 - t)))


@dataclass
class SphereSamples:
    """Quadrature view of a sphere map over its flat fundamental domain."""

    points: np.ndarray    # (N, n+1), on the unit sphere
    density: np.ndarray   # (N,), pullback conformal factor against flat coords
    cell: float           # flat measure per sample
    resolution: int


@dataclass
class SphereMap:
    """Sampled or analytic conformal map from a flat torus into S^n."""

    name: str
    target_dim: int
    degree: int = None
    modulus: TorusModulus = None
    _sampler: object = field(default=None, repr=False)

    def samples(self, resolution: int = 128) -> SphereSamples:
        return self._sampler(resolution)

    def sphere_check(self, resolution: int = 32) -> float:
        """Max | |Phi| - 1 | over the sample set."""
        pts = self.samples(resolution).points
        return float(np.max(np.abs(np.linalg.norm(pts, axis=-1) - 1.0)))


def weierstrass_sphere_map(lattice: Lattice = None) -> SphereMap:
    """Degree-2 map of the torus C/lattice to S^2 via its even elliptic function."""
    lattice = lattice or Lattice([1.0, 0.0], [0.0, 1.0])
    wp = WeierstrassP(lattice)
    basis = lattice.basis
    cell_area = lattice.covolume

    def sampler(resolution: int) -> SphereSamples:
        s, t = midpoint_grid(resolution)
        x = basis[0, 0] * s + basis[0, 1] * t
        y = basis[1, 0] * s + basis[1, 1] * t
        z = (x + 1j * y).ravel()
        p, dp = wp(z)
        density = sphere_pullback_factor(p, dp)
        points = stereographic_to_sphere(p)
        return SphereSamples(points, density, cell_area / resolution**2,
                             resolution)

    from .lattices import reduce_to_fundamental_domain

    smap = SphereMap("weierstrass", target_dim=2, degree=2,
                     modulus=reduce_to_fundamental_domain(lattice))
    smap._sampler = sampler
    smap.weierstrass = wp
    return smap


def clifford_torus_map() -> SphereMap:
    """The square torus embedded in S^3 with half-unit radii circles."""

    def sampler(resolution: int) -> SphereSamples:
        s, t = midpoint_grid(resolution)
        u = 2.0 * np.pi * s.ravel()
        v = 2.0 * np.pi * t.ravel()
        pts = np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)],
                       axis=-1) / np.sqrt(2.0)
        density = np.full(u.size, 0.5)  # pullback of g_can is (du^2+dv^2)/2
        cell = (2.0 * np.pi) ** 2 / resolution**2
        return SphereSamples(pts, density, cell, resolution)

    return SphereMap("clifford", target_dim=3, degree=None, modulus=None,
                     _sampler=sampler)


def center_of_mass(smap_or_samples, weights: np.ndarray = None,
                   mobius: MobiusMap = None, resolution: int = 64) -> np.ndarray:
    """Weighted mean of (mobius o Phi) in R^{n+1}.

    Weights default to the map's own area measure (density times cell).
    """
    samples = (smap_or_samples.samples(resolution)
               if isinstance(smap_or_samples, SphereMap) else smap_or_samples)
    pts = samples.points
    if weights is None:
        weights = samples.density * samples.cell
    if mobius is not None:
        pts = mobius(pts)
    total = float(np.sum(weights))
    if total <= 0:
        raise ValueError("measure must be positive")
    return np.asarray(weights) @ pts / total


@dataclass
class HerschResult:
    mobius: MobiusMap
    residual: float
    iterations: int
    converged: bool


def hersch_center(smap_or_samples, weights: np.ndarray = None,
                  tol: float = 1e-8, max_iter: int = 400,
                  resolution: int = 64) -> HerschResult:
    """Conformal automorphism gamma with |mean of gamma o Phi| < tol.

    Damped fixed-point iteration: dilate toward the antipode of the current
    mean with step proportional to |mean|, backtracking on failure to
    decrease; an axis-aligned bisection takes over if the iteration stalls.
    Existence is guaranteed for non-atomic measures, but the construction is
    not, so non-convergence is reported rather than raised.
    """
    samples = (smap_or_samples.samples(resolution)
               if isinstance(smap_or_samples, SphereMap) else smap_or_samples)
    pts = samples.points
    if weights is None:
        weights = samples.density * samples.cell
    weights = np.asarray(weights, dtype=float)
    total = float(weights.sum())
    gamma = MobiusMap.identity(pts.shape[-1] - 1)

    def residual_of(g: MobiusMap) -> tuple[float, np.ndarray]:
        # overflow on runaway candidates is expected and means "reject"
        with np.errstate(over="ignore", invalid="ignore"):
            m = weights @ g(pts) / total
        if not np.all(np.isfinite(m)):
            return np.inf, np.zeros_like(m)
        return float(np.linalg.norm(m)), m

    res, mean = residual_of(gamma)
    stall = 0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if res < tol:
            return HerschResult(gamma.renormalized(), res, iterations - 1, True)
        if float(np.max(np.abs(gamma.matrix))) > 1e6:
            break  # running away: a dominant atom admits no center
        axis = -mean / res
        # damped move toward the antipode of the mean: try the natural step
        # |mean| first, and when it fails to make progress solve the 1D
        # subproblem along the axis outright (scan + golden section), which
        # handles concentrated measures that need large rapidity
        improved = False
        step = res
        for _ in range(4):
            cand = MobiusMap.dilation(step, axis).compose(gamma).renormalized()
            cand_res, cand_mean = residual_of(cand)
            if cand_res < res * (1.0 - 1e-3 * min(step, 1.0)):
                gamma, res, mean = cand, cand_res, cand_mean
                improved = True
                break
            step *= 0.5
        if not improved:
            step = _line_search_axis(gamma, axis, residual_of)
            cand = MobiusMap.dilation(step, axis).compose(gamma).renormalized()
            cand_res, cand_mean = residual_of(cand)
            if cand_res < res:
                gamma, res, mean = cand, cand_res, cand_mean
            else:
                stall += 1
                if stall >= 3:
                    gamma, res, mean = _bisect_axis(gamma, axis, residual_of,
                                                    res)
                    stall = 0
    res, mean = residual_of(gamma)
    return HerschResult(gamma, res, iterations, res < tol)


def _line_search_axis(gamma, axis, residual_of, s_max: float = 10.0) -> float:
    """Minimize |mean| over dilations along one axis: coarse scan, then golden."""
    def phi(s: float) -> float:
        return residual_of(MobiusMap.dilation(s, axis).compose(gamma))[0]

    grid = np.linspace(0.0, s_max, 41)
    vals = [phi(s) for s in grid]
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = phi(c), phi(d)
    for _ in range(60):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = phi(d)
    return float(0.5 * (a + b))


def _bisect_axis(gamma, axis, residual_of, res):
    """1D fallback: zero the mean component along the current axis."""
    def component(t):
        g = MobiusMap.dilation(t, axis).compose(gamma)
        _, m = residual_of(g)
        return float(m @ axis)

    lo, hi = 0.0, 1.0
    f_lo = component(lo)
    for _ in range(60):
        if component(hi) * f_lo < 0:
            break
        hi *= 2.0
        if hi > 50:
            break
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if component(mid) * f_lo < 0:
            hi = mid
        else:
            lo = mid
    g = MobiusMap.dilation(0.5 * (lo + hi), axis).compose(gamma)
    new_res, new_mean = residual_of(g)
    if new_res < res:
        return g, new_res, new_mean
    return gamma, res, residual_of(gamma)[1]


def conformal_area(smap: SphereMap, mobius: MobiusMap = None,
                   resolution: int = 128, check: bool = True) -> float:
    """Area of (gamma o Phi)^* g_can by midpoint quadrature.

    With `check` the integral is recomputed at half resolution and the two
    values must agree to 0.1%.
    """
    def at(n: int) -> float:
        samples = smap.samples(n)
        dens = samples.density
        if mobius is not None:
            dens = dens * mobius.conformal_scale(samples.points) ** 2
        return float(np.sum(dens) * samples.cell)

    area = at(resolution)
    if check:
        coarse = at(resolution // 2)
        if abs(coarse - area) > 1e-3 * max(abs(area), 1e-30):
            raise RuntimeError(
                f"quadrature not converged: {coarse:.8g} vs {area:.8g}; "
                "refine the resolution")
    return area


def area_monotonicity_trace(smap: SphereMap, axis: np.ndarray,
                            t_grid, resolution: int = 128) -> list[dict]:
    """Area of gamma_t^axis o Phi along a dilation flow; non-increasing in t."""
    rows = []
    for t in t_grid:
        gamma = MobiusMap.dilation(float(t), axis) if t else None
        area = conformal_area(smap, gamma, resolution=resolution, check=False)
        rows.append({"t": float(t), "area": area})
    return rows


@dataclass
class CapacityProfile:
    """Radial log-cutoff: 1 on B_rho, 0 outside B_1, harmonic in between."""

    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("need 0 < rho < 1")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            mid = np.log(r) / np.log(self.rho)
        return np.clip(np.where(r <= self.rho, 1.0, np.where(r >= 1.0, 0.0, mid)),
                       0.0, 1.0)

    @property
    def energy(self) -> float:
        """Dirichlet energy 2*pi/|ln rho| of the cutoff (the capacity)."""
        return 2.0 * np.pi / abs(np.log(self.rho))

    def discrete_energy(self, resolution: int = 2048) -> float:
        """Edge-difference Dirichlet energy on a Cartesian grid over [-1,1]^2."""
        h = 2.0 / resolution
        x = -1.0 + h * (np.arange(resolution + 1))
        xx, yy = np.meshgrid(x, x, indexing="ij")
        u = self(np.hypot(xx, yy))
        ex = np.diff(u, axis=0)
        ey = np.diff(u, axis=1)
        return float(np.sum(ex * ex) + np.sum(ey * ey))

    def spherical_energy(self) -> float:
        """Energy of the profile pushed through stereographic projection.

        The profile becomes a function of the polar angle with r = tan(th/2);
        conformal invariance keeps the Dirichlet integral unchanged.
        """
        def integrand(th):
            r = np.tan(th / 2.0)
            if r <= self.rho or r >= 1.0:
                return 0.0
            dv = (1.0 + r * r) / (2.0 * r * np.log(self.rho))
            return dv * dv * np.sin(th)

        th_lo = 2.0 * np.arctan(self.rho)
        val, _ = quad(integrand, th_lo, np.pi / 2, limit=200)
        return 2.0 * np.pi * val


def capacity_profile(rho: float) -> tuple[CapacityProfile, float]:
    """Profile plus its Dirichlet energy 2*pi/|ln rho|."""
    prof = CapacityProfile(rho)
    return prof, prof.energy


def mobius_degeneration_study(smap: SphereMap = None, t_grid=(0.0, 0.5, 0.9),
                              bandwidth: int = 12, resolution: int = 512,
                              eig_count: int = 3) -> list[dict]:
    """lambda1 of (gamma_t o Phi)^* g_can along the disk-automorphism family.

    gamma_t = (z + it)/(1 - itz) in the stereographic chart, i.e. the dilation
    toward the preimage of i with rapidity log((1+t)/(1-t)).  The pullback
    areas stay at 4*pi*degree while lambda1 collapses as t -> 1.
    """
    smap = smap or weierstrass_sphere_map()
    if smap.modulus is None:
        raise ValueError("need a sphere map with a torus modulus")
    axis = np.array([0.0, 1.0, 0.0])  # stereographic preimage of i
    rows = []
    for t in t_grid:
        samples = smap.samples(resolution)
        density = samples.density
        if t:
            gamma = MobiusMap.dilation(disk_automorphism_rapidity(float(t)), axis)
            density = density * gamma.conformal_scale(samples.points) ** 2
        factor = ConformalFactor.from_grid(
            smap.modulus, density.reshape(resolution, resolution),
            description=f"{smap.name} pullback, t={t}")
        spec = assemble(factor, bandwidth).spectrum(eig_count)
        rows.append({"t": float(t), "area": spec.area,
                     "lambda1": spec.lambda1, "lambda1bar": spec.lambda1_bar})
    return rows
