"""Complete elliptic integrals, the Weierstrass P-function, and round-sphere
pullback densities of meromorphic maps.

The P-function is evaluated from its Laurent series about the origin, with
invariants g2, g3 obtained from rapidly convergent q-series, after reducing
the argument to the nearest lattice translate and halving it until the series
converges at machine precision; the value is then pushed back out with the
algebraic duplication law.  This avoids slowly convergent lattice sums while
staying uniformly accurate over the fundamental domain.

A meromorphic F on a torus defines a map to the round 2-sphere through
stereographic projection; the pullback of the round metric is

    factor = 4 |F'|^2 / (1 + |F|^2)^2

times the flat metric.  The factor vanishes to order 2m at a branch point of
order m and its total integral is 4*pi*deg(F).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .lattices import Lattice

__all__ = [
    "complete_E",
    "complete_E_quadrature",
    "WeierstrassP",
    "sphere_pullback_factor",
    "stereographic_to_sphere",
]

#: Points closer to a pole than this (relative to the shortest period) are
#: flagged; downstream quadrature must not rely on values inside this disk.
POLE_THRESHOLD = 1e-3

_SERIES_TERMS = 32
_SERIES_RATIO = 0.5  # target |z| / |shortest period| before summing


def complete_E(k: float) -> float:
    """Complete elliptic integral of the second kind by AGM iteration.

    E(k) = int_0^{pi/2} sqrt(1 - k^2 sin^2 t) dt, 0 <= k <= 1, to ~1e-15.
    """
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"modulus k = {k} outside [0, 1]")
    if k == 1.0:
        return 1.0
    a = 1.0
    b = np.sqrt(1.0 - k * k)
    c = k
    total = 0.5 * c * c  # 2^{n-1} c_n^2 at n = 0
    power = 0.5
    for _ in range(60):
        a, b, c = 0.5 * (a + b), np.sqrt(a * b), 0.5 * (a - b)
        power *= 2.0
        total += power * c * c
        if c < 1e-17:
            break
    big_k = np.pi / (2.0 * a)
    return big_k * (1.0 - total)


def complete_E_quadrature(k: float, tol: float = 1e-13) -> float:
    """Direct adaptive quadrature of the defining integral (oracle path)."""
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"modulus k = {k} outside [0, 1]")
    val, _ = quad(lambda t: np.sqrt(1.0 - (k * np.sin(t)) ** 2), 0.0, np.pi / 2,
                  epsabs=tol, epsrel=tol)
    return val


def _divisor_power_sums(n_max: int, power: int) -> np.ndarray:
    sums = np.zeros(n_max + 1)
    for d in range(1, n_max + 1):
        for n in range(d, n_max + 1, d):
            sums[n] += d**power
    return sums


def _invariants_from_tau(tau: complex, n_terms: int = 40) -> tuple[complex, complex]:
    """g2, g3 of the lattice <1, tau> from Eisenstein q-series."""
    q = np.exp(2j * np.pi * tau)
    n = np.arange(1, n_terms + 1)
    qn = q**n
    e4 = 1.0 + 240.0 * np.sum(_divisor_power_sums(n_terms, 3)[1:] * qn)
    e6 = 1.0 - 504.0 * np.sum(_divisor_power_sums(n_terms, 5)[1:] * qn)
    g2 = (4.0 * np.pi**4 / 3.0) * e4
    g3 = (8.0 * np.pi**6 / 27.0) * e6
    return complex(g2), complex(g3)


def _laurent_coefficients(g2: complex, g3: complex, terms: int) -> np.ndarray:
    """c_k with P(z) = z^-2 + sum_{k>=2} c_k z^{2k-2} (c_0, c_1 unused)."""
    c = np.zeros(terms + 1, dtype=complex)
    c[2] = g2 / 20.0
    c[3] = g3 / 28.0
    for k in range(4, terms + 1):
        acc = sum(c[m] * c[k - m] for m in range(2, k - 1))
        c[k] = 3.0 * acc / ((2 * k + 1) * (k - 3))
    return c


@dataclass
class WeierstrassP:
    """Weierstrass P-function of a rank-2 lattice, with derivative.

    The lattice is taken as complex periods w1, w2; invariants satisfy
    (P')^2 = 4 P^3 - g2 P - g3.
    """

    lattice: Lattice
    terms: int = _SERIES_TERMS
    g2: complex = field(init=False)
    g3: complex = field(init=False)

    def __post_init__(self):
        b = self.lattice.basis
        w1 = complex(b[0, 0], b[1, 0])
        w2 = complex(b[0, 1], b[1, 1])
        u, v = _gauss_reduce_complex(w1, w2)
        if (v / u).imag < 0:
            v = -v  # same lattice, period ratio moved to the upper half-plane
        tau = v / u
        # Gauss reduction guarantees |Re tau| <= 1/2 and |tau| >= 1, so the
        # q-series for the invariants of <1, tau> converge at machine rate;
        # homogeneity then rescales them to the actual periods.
        g2u, g3u = _invariants_from_tau(tau)
        self.g2 = g2u / u**4
        self.g3 = g3u / u**6
        self._coeff = _laurent_coefficients(self.g2, self.g3, self.terms)
        self._shortest = abs(u)

    def _reduce(self, z: np.ndarray) -> np.ndarray:
        """Translate each point to the lattice cell centered at the origin."""
        basis = self.lattice.basis
        inv = np.linalg.inv(basis)
        pts = np.stack([z.real.ravel(), z.imag.ravel()])
        coords = inv @ pts
        base = np.round(coords)
        best = None
        best_norm = None
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                shift = basis @ (base + np.array([[di], [dj]]))
                red = pts - shift
                nrm = red[0] ** 2 + red[1] ** 2
                if best is None:
                    best, best_norm = red.copy(), nrm
                else:
                    mask = nrm < best_norm
                    best[:, mask] = red[:, mask]
                    best_norm = np.minimum(best_norm, nrm)
        return (best[0] + 1j * best[1]).reshape(z.shape)

    def _series(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z2 = z * z
        p = 1.0 / z2
        dp = -2.0 / (z2 * z)
        zpow = np.ones_like(z)  # z^{2k-4} running power
        for k in range(2, self.terms + 1):
            if k == 2:
                zpow = z2
            else:
                zpow = zpow * z2
            # zpow is now z^{2k-2}
            p = p + self._coeff[k] * zpow
            dp = dp + (2 * k - 2) * self._coeff[k] * zpow / z
        return p, dp

    def __call__(self, z, return_mask: bool = False):
        """Evaluate (P, P') at complex points; poles flagged, not raised.

        Returns (p, dp) or (p, dp, pole_mask).  At flagged points the values
        are the series principal parts and remain finite floats, but only the
        leading order is trustworthy there: P has a double pole of unit
        coefficient, P(z) ~ 1/(z - w)^2, at every lattice point w.
        """
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        zr = self._reduce(np.atleast_1d(z))
        dist = np.abs(zr)
        pole_mask = dist < POLE_THRESHOLD * self._shortest
        # nudge (near-)lattice points off the pole: keeps every intermediate
        # of the duplication law inside float range while the flag records
        # that only the principal part is meaningful there
        floor = 1e-20 * self._shortest
        zr = np.where(dist < floor, floor, zr)

        halvings = 0
        target = _SERIES_RATIO * self._shortest
        max_dist = float(np.max(np.abs(zr)))
        while max_dist / (2**halvings) > target:
            halvings += 1
        p, dp = self._series(zr / (2**halvings))
        for _ in range(halvings):
            p, dp = self._duplicate(p, dp)
        if scalar and not return_mask:
            return complex(p[0]), complex(dp[0])
        if scalar:
            return complex(p[0]), complex(dp[0]), bool(pole_mask[0])
        if return_mask:
            return p, dp, pole_mask
        return p, dp

    def _duplicate(self, p: np.ndarray, dp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(P, P') at 2z from values at z via the algebraic duplication law."""
        g2, g3 = self.g2, self.g3
        num = p**4 + (g2 / 2.0) * p**2 + 2.0 * g3 * p + g2**2 / 16.0
        den = 4.0 * p**3 - g2 * p - g3
        dnum = 4.0 * p**3 + g2 * p + 2.0 * g3
        dden = 12.0 * p**2 - g2
        p2 = num / den
        dp2 = (dnum * den - num * dden) / den**2 * dp / 2.0
        return p2, dp2

    def differential_residual(self, z) -> np.ndarray:
        """|(P')^2 - 4P^3 + g2 P + g3|, the defining cubic's residual."""
        p, dp = self.__call__(z)
        return np.abs(dp**2 - (4.0 * p**3 - self.g2 * p - self.g3))

    def half_period_points(self) -> np.ndarray:
        """The three half-lattice points (branch points with P' = 0)."""
        b = self.lattice.basis
        w1 = complex(b[0, 0], b[1, 0])
        w2 = complex(b[0, 1], b[1, 1])
        return np.array([w1 / 2, w2 / 2, (w1 + w2) / 2])


def _gauss_reduce_complex(w1: complex, w2: complex) -> tuple[complex, complex]:
    """Lagrange-Gauss reduction on complex periods."""
    for _ in range(1000):
        if abs(w1) > abs(w2):
            w1, w2 = w2, w1
        mu = round((w2 * w1.conjugate()).real / abs(w1) ** 2)
        if mu == 0:
            return w1, w2
        w2 = w2 - mu * w1
    raise RuntimeError("reduction did not terminate")


def stereographic_to_sphere(w: np.ndarray) -> np.ndarray:
    """Inverse stereographic projection C -> S^2 (north pole = infinity).

    Stable for large |w| through the inverted chart; returns (..., 3).
    """
    w = np.asarray(w, dtype=complex)
    big = np.abs(w) > 1.0
    u = np.where(big, 1.0 / np.where(big, w, 1.0), w)
    x, y = u.real, u.imag
    r2 = x * x + y * y
    # direct chart: (2x, 2y, r2-1)/(r2+1); inverted chart swaps the z-sign
    # and the sign of y because u = 1/w conjugates the angle.
    denom = 1.0 + r2
    out = np.empty(w.shape + (3,))
    out[..., 0] = 2.0 * x / denom
    out[..., 1] = np.where(big, -1.0, 1.0) * 2.0 * y / denom
    out[..., 2] = np.where(big, -1.0, 1.0) * (r2 - 1.0) / denom
    return out


def sphere_pullback_factor(values: np.ndarray, derivatives: np.ndarray) -> np.ndarray:
    """Conformal density 4|F'|^2/(1+|F|^2)^2 of a meromorphic map to S^2.

    `values` and `derivatives` are F and F' on the evaluation set; points
    where |F| is large are rearranged through the inverted chart 1/F so the
    result stays finite through double poles.
    """
    v = np.asarray(values, dtype=complex)
    d = np.asarray(derivatives, dtype=complex)
    small = np.abs(v) <= 1.0
    vs = np.where(small, v, 1.0)
    out_small = 4.0 * np.abs(np.where(small, d, 0.0)) ** 2 / (1.0 + np.abs(vs) ** 2) ** 2
    # inverted chart: G = 1/F, G' = -F'/F^2, factor = 4|G'|^2/(1+|G|^2)^2
    vb = np.where(small, 1.0, v)
    gb = 1.0 / vb
    gdb = -np.where(small, 0.0, d) * gb * gb
    out_big = 4.0 * np.abs(gdb) ** 2 / (1.0 + np.abs(gb) ** 2) ** 2
    return np.where(small, out_small, out_big)
