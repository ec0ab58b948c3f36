"""Laplace spectra with normalization metadata and topological ceilings.

Every spectrum produced by this package passes through :class:`Spectrum`,
which hard-asserts the genus-dependent upper bounds for the scale-invariant
quantity lambda1 * area: 8*pi*floor((genus+3)/2) for orientable surfaces and
twice that for non-orientable ones (genus of the orientable double cover).
For the two surfaces handled here (genus-1) the ceilings are 16*pi for the
torus and 32*pi for the Klein bottle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Spectrum",
    "CeilingViolation",
    "orientable_ceiling",
    "nonorientable_ceiling",
    "TORUS_CEILING",
    "KLEIN_CEILING",
]

#: Eigenvalues closer than this (relative to lambda1) form one cluster.
CLUSTER_RTOL = 1e-6

#: Absolute slack allowed on the topological ceilings.
CEILING_TOL = 1e-9

#: Threshold under which a computed eigenvalue counts as the constant mode.
ZERO_TOL = 1e-6


class CeilingViolation(AssertionError):
    """A normalized eigenvalue exceeded its topological upper bound."""


def orientable_ceiling(genus: int) -> float:
    """Upper bound for lambda1*area on an orientable surface of given genus."""
    return 8.0 * np.pi * ((genus + 3) // 2)


def nonorientable_ceiling(genus: int) -> float:
    """Upper bound for lambda1*area, genus that of the orientable double cover."""
    return 16.0 * np.pi * ((genus + 3) // 2)


TORUS_CEILING = orientable_ceiling(1)   # 16*pi
KLEIN_CEILING = nonorientable_ceiling(1)  # 32*pi

_CEILINGS = {"torus": TORUS_CEILING, "klein": KLEIN_CEILING}


@dataclass(frozen=True)
class Spectrum:
    """Ordered Laplace eigenvalues of a closed surface plus normalization data.

    Parameters
    ----------
    eigenvalues : array
        Non-decreasing eigenvalues starting with the constant mode (0 up to
        solver tolerance), counted with multiplicity.
    area : float
        Total measure of the surface (for a density f over a flat background,
        the mass of f).
    surface : str
        Either ``"torus"`` or ``"klein"``; selects the ceiling.
    """

    eigenvalues: np.ndarray
    area: float
    surface: str = "torus"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        object.__setattr__(self, "eigenvalues", ev)
        if ev.ndim != 1 or ev.size < 1:
            raise ValueError("need a one-dimensional, non-empty eigenvalue list")
        if np.any(np.diff(ev) < -ZERO_TOL * max(1.0, abs(ev[-1]))):
            raise ValueError("eigenvalues must be non-decreasing")
        if self.surface not in _CEILINGS:
            raise ValueError(f"unknown surface kind {self.surface!r}")
        if not self.area > 0:
            raise ValueError("area must be positive")
        if abs(ev[0]) > ZERO_TOL:
            raise ValueError(
                f"lowest eigenvalue {ev[0]:.3e} is not the constant mode"
            )
        ceiling = _CEILINGS[self.surface]
        lb = self.lambda1_bar
        if lb is not None and lb > ceiling + CEILING_TOL:
            raise CeilingViolation(
                f"lambda1*area = {lb:.12g} exceeds the {self.surface} "
                f"ceiling {ceiling:.12g}"
            )

    @property
    def lambda1(self) -> float | None:
        """First eigenvalue above the constant mode, None if not computed."""
        above = self.eigenvalues[self.eigenvalues > ZERO_TOL]
        return float(above[0]) if above.size else None

    @property
    def lambda1_bar(self) -> float | None:
        lam = self.lambda1
        return None if lam is None else lam * self.area

    @property
    def normalized(self) -> np.ndarray:
        """All eigenvalues scaled by the area."""
        return self.eigenvalues * self.area

    @property
    def ceiling(self) -> float:
        return _CEILINGS[self.surface]

    def multiplicity_groups(self, rtol: float = CLUSTER_RTOL) -> list[tuple[float, int]]:
        """Distinct eigenvalues with multiplicities, clustered at ``rtol``.

        The cluster scale is lambda1 so that maximizers with multiple first
        eigenvalues are never split by roundoff.
        """
        lam1 = self.lambda1 or 1.0
        groups: list[tuple[float, int]] = []
        for ev in self.eigenvalues:
            if groups and abs(ev - groups[-1][0]) <= rtol * max(lam1, abs(ev)):
                val, mult = groups[-1]
                groups[-1] = ((val * mult + ev) / (mult + 1), mult + 1)
            else:
                groups.append((float(ev), 1))
        return groups

    def multiplicity_of_lambda1(self, rtol: float = CLUSTER_RTOL) -> int:
        for val, mult in self.multiplicity_groups(rtol):
            if val > ZERO_TOL:
                return mult
        return 0

    def as_dict(self) -> dict:
        d = {
            "surface": self.surface,
            "area": float(self.area),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "lambda1": self.lambda1,
            "lambda1bar": self.lambda1_bar,
        }
        d.update(self.meta)
        return d
