"""Exponential integrability of the Wolff potential of an L^1 density.

For a density ``f >= 0`` on a bounded domain of diameter ``D`` the
quantity

    LHS(delta) = int_Omega exp(n (1 - delta) W^{f}(x, D) / ||f||_1^{1/(n-1)}) dx

is bounded by ``c(n) 2^{2n+1} |B(0,D)| / delta^{n+1} + 2^n |Omega|``.
This module evaluates both sides and sweeps ``delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .fields import Grid, RadonMeasure, ScalarField, ball_volume
from .wolff import wolff_field


def domain_diameter(grid: Grid, domain: np.ndarray) -> float:
    """Largest distance between two cell centers of the domain."""
    pts = grid.points()[domain]
    if len(pts) < 2:
        return 0.0
    try:
        pts = pts[ConvexHull(pts).vertices]
    except (QhullError, ValueError):
        pass
    best = 0.0
    for k in range(0, len(pts), 2048):
        d = np.linalg.norm(pts[k:k + 2048, None, :] - pts[None, :, :], axis=-1)
        best = max(best, float(d.max()))
    return best


@dataclass(frozen=True, eq=False)
class BMProblem:
    """Density ``f`` restricted to ``domain`` on an unmirrored grid."""

    f: ScalarField
    domain: np.ndarray
    delta: float = 0.5

    def __post_init__(self):
        dom = np.asarray(self.domain, dtype=bool)
        object.__setattr__(self, "domain", dom)
        if any(self.f.grid.mirror):
            raise ValueError("use an unmirrored grid")
        if self.f.has_singular or np.any(self.f.values[dom] < 0):
            raise ValueError("density must be finite and nonnegative")
        check_delta(self.delta)

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def diameter(self) -> float:
        return domain_diameter(self.grid, self.domain)

    @property
    def volume(self) -> float:
        return float(self.domain.sum()) * self.grid.h**self.n

    def restricted(self) -> ScalarField:
        return ScalarField(self.grid, np.where(self.domain, self.f.values, 0.0))

    @property
    def mass(self) -> float:
        return self.restricted().integral()

    def with_delta(self, delta: float) -> "BMProblem":
        return BMProblem(self.f, self.domain, delta)


def check_delta(delta: float):
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")


def normalized_potential(p: BMProblem, nodes: int = 64) -> np.ndarray:
    """``W^{f}(x, D) / ||f||^{1/(n-1)}`` on the domain cells (zero elsewhere)."""
    mass = p.mass
    if mass <= 0:
        return np.zeros(p.grid.shape)
    W = wolff_field(RadonMeasure((), p.restricted()), p.diameter, nodes)
    return np.where(p.domain, W.values / mass ** (1 / (p.n - 1)), 0.0)


def lhs_from_potential(wn: np.ndarray, p: BMProblem, delta: float) -> float:
    check_delta(delta)
    e = np.exp(p.n * (1 - delta) * wn[p.domain])
    return float(np.sum(e)) * p.grid.h**p.n


def bm_lhs(p: BMProblem, nodes: int = 64) -> float:
    """Cell-sum quadrature of the exponential integral."""
    return lhs_from_potential(normalized_potential(p, nodes), p, p.delta)


def bm_rhs(p: BMProblem, c_n: float) -> float:
    if c_n <= 0:
        raise ValueError("c(n) must be positive")
    return rhs_formula(p.n, p.delta, p.diameter, p.volume, c_n)


def rhs_formula(n: int, delta: float, D: float, volume: float, c_n: float) -> float:
    check_delta(delta)
    return c_n * 2 ** (2 * n + 1) * float(ball_volume(n, D)) / delta ** (n + 1) + 2**n * volume


@dataclass
class SweepRow:
    member: str
    delta: float
    lhs: float
    scaled: float


@dataclass
class SweepReport:
    n: int
    rows: list[SweepRow]
    envelope: np.ndarray
    deltas: np.ndarray
    fitted_c: float
    all_finite: bool
    monotone: bool
    extra: dict = field(default_factory=dict)

    @property
    def envelope_ratio(self) -> float:
        return float(self.envelope.max() / self.envelope.min())


def bm_sweep(family: dict[str, BMProblem], deltas: Sequence[float], nodes: int = 64) -> SweepReport:
    """LHS over a family and a delta grid, with the delta^{n+1} envelope.

    ``fitted_c`` is the smallest ``c(n)`` making the bound hold on every
    entry of the sweep.
    """
    deltas = np.asarray(deltas, dtype=float)
    rows = []
    env = np.zeros(deltas.size)
    fitted = 0.0
    finite = True
    monotone = True
    n = None
    for name, p in family.items():
        n = p.n
        wn = normalized_potential(p, nodes)
        D, vol = p.diameter, p.volume
        vals = []
        for k, d in enumerate(deltas):
            L = lhs_from_potential(wn, p, d)
            vals.append(L)
            finite &= math.isfinite(L)
            s = L * d ** (n + 1)
            env[k] = max(env[k], s)
            rows.append(SweepRow(name, float(d), L, s))
            need = (L - 2**n * vol) * d ** (n + 1) / (2 ** (2 * n + 1) * float(ball_volume(n, D)))
            fitted = max(fitted, need)
        order = np.argsort(deltas)
        monotone &= bool(np.all(np.diff(np.asarray(vals)[order]) <= 1e-12 * max(vals)))
    return SweepReport(n or 0, rows, env, deltas, fitted, finite, monotone)


# -- test densities -------------------------------------------------------


def bump_density(grid: Grid, center: Sequence[float], radius: float, mass: float = 1.0) -> ScalarField:
    """Smooth compactly supported bump ``(1 - |x-c|^2/a^2)_+^2`` with the given discrete mass."""
    r = grid.radius(center)
    v = np.clip(1 - (r / radius) ** 2, 0.0, None) ** 2
    total = float(np.sum(v * grid.cell_weights()))
    if total <= 0:
        raise ValueError("bump is not resolved by the grid")
    return ScalarField(grid, v * mass / total)


def uniform_density(grid: Grid, domain: np.ndarray, mass: float = 1.0) -> ScalarField:
    v = np.asarray(domain, float)
    return ScalarField(grid, v * mass / float(np.sum(v * grid.cell_weights())))


def standard_family(n: int, h: float, radius: float = 0.4) -> tuple[Grid, np.ndarray, dict[str, ScalarField]]:
    """Five unit-mass densities on the unit ball: uniform, a central bump, the
    same bump 4x concentrated, the bump translated, and two half-mass bumps."""
    g = Grid.centered(n, 1.0 + 2 * h, h)
    dom = g.radius() < 1.0
    off = np.zeros(n)
    off[0] = 0.4
    fam = {
        "uniform": uniform_density(g, dom),
        "bump": bump_density(g, np.zeros(n), radius),
        "bump_concentrated": bump_density(g, np.zeros(n), radius / 4),
        "bump_shifted": bump_density(g, off, radius * 0.75),
        "two_bumps": ScalarField(g, bump_density(g, off, radius / 2, 0.5).values
                                 + bump_density(g, -off, radius / 2, 0.5).values),
    }
    return g, dom, fam
