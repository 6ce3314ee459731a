"""Conformal (n-)capacity of condensers on grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import Grid, RadonMeasure, ScalarField, dilate, sphere_area
from .nlaplace import DirichletProblem, Energy, SolverReport, solve_dirichlet


@dataclass(frozen=True, eq=False)
class Condenser:
    """Plate ``K`` (cells held at 1) inside the open domain ``Omega`` (cell masks).

    Cells outside ``Omega`` are held at 0.  The plate must keep a gap of
    two cells from the complement of ``Omega``.
    """

    grid: Grid
    plate: np.ndarray
    domain: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.plate, dtype=bool)
        D = np.asarray(self.domain, dtype=bool) | K
        if not K.any():
            raise ValueError("condenser plate is empty")
        if np.any(dilate(K, 2) & ~D):
            raise ValueError("plate must stay two cells away from the domain boundary")
        if np.any(D & self.grid.box_boundary()):
            raise ValueError("domain touches the grid boundary")
        object.__setattr__(self, "plate", K)
        object.__setattr__(self, "domain", D)

    @property
    def n(self) -> int:
        return self.grid.n

    @classmethod
    def radial(cls, n: int, rho: float, R: float, h: float, mirror: bool = True) -> "Condenser":
        """``K = closed ball B(0, rho)`` inside ``Omega = B(0, R)``."""
        g = Grid.centered(n, R + 2 * h, h, mirror)
        r = g.radius()
        return cls(g, r <= rho, r < R)

    def problem(self, epsilon: float | None = None) -> DirichletProblem:
        return DirichletProblem(self.grid, self.domain & ~self.plate, np.where(self.plate, 1.0, 0.0),
                                RadonMeasure(), epsilon)


@dataclass
class CapacityResult:
    value: float
    u: ScalarField
    report: SolverReport
    h: float
    epsilon: float

    @property
    def converged(self) -> bool:
        return self.report.converged


def capacity(c: Condenser, epsilon: float | None = None) -> CapacityResult:
    """``inf int |Du|^n`` over ``u = 1`` on K, ``u = 0`` off Omega.

    The constrained cells are eliminated from the unknowns.  The value is
    the regularized energy with the ``eps^n`` background removed.
    """
    p = c.problem(epsilon)
    u, rep = solve_dirichlet(p)
    E = Energy(c.grid, p.epsilon)
    value = c.n * E.value(u.values, subtract_background=True)
    return CapacityResult(value, u, rep, c.grid.h, float(p.epsilon))


def radial_capacity(n: int, rho: float, R: float) -> float:
    """``cap_n(B(0,rho), B(0,R)) = omega_{n-1} (log R/rho)^{1-n}``."""
    if not 0 < rho < R:
        raise ValueError("need 0 < rho < R")
    return sphere_area(n) * math.log(R / rho) ** (1 - n)


def annulus_capacity(n: int, r1: float, r2: float, a: float, b: float) -> float:
    """Capacity of the closed shell ``r1 <= |x| <= r2`` inside ``a < |x| < b``."""
    return radial_capacity(n, a, r1) + radial_capacity(n, r2, b)


def richardson(v1: float, h1: float, v2: float, h2: float, order: float = 1.0) -> float:
    """Extrapolate ``v(h) = v0 + C h^order`` to ``h = 0`` from two grids."""
    a, b = h1**order, h2**order
    return (v2 * a - v1 * b) / (a - b)


@dataclass
class ExtrapolatedCapacity:
    value: float
    results: list[CapacityResult] = field(default_factory=list)

    @property
    def spacings(self) -> list[float]:
        return [r.h for r in self.results]


def extrapolated_capacity(build: Callable[[float], Condenser], h1: float, h2: float,
                          epsilon_factor: float = 1.0) -> ExtrapolatedCapacity:
    """Capacity from two grid spacings with first-order Richardson extrapolation."""
    res = [capacity(build(h), epsilon_factor * h) for h in (h1, h2)]
    return ExtrapolatedCapacity(richardson(res[0].value, h1, res[1].value, h2), res)


@dataclass(frozen=True)
class LevelSetReport:
    lam: float
    capacity: float
    mass: float
    ratio: float
    cells: int


def level_set_capacity_check(u: ScalarField, mu: RadonMeasure, lam: float, domain: np.ndarray,
                             epsilon: float | None = None) -> LevelSetReport:
    """``lam^{n-1} cap_n({u > lam}, Omega) / mu(Omega)`` for ``u`` solved with zero
    boundary data on ``domain``."""
    g = u.grid
    domain = np.asarray(domain, bool)
    level = domain & ((u.values > lam) | u.singular)
    m = mu.total_mass()
    if not level.any():
        return LevelSetReport(lam, 0.0, m, 0.0, 0)
    cap = capacity(Condenser(g, level, domain), epsilon).value
    return LevelSetReport(lam, cap, m, lam ** (g.n - 1) * cap / m, int(level.sum()))


@dataclass(frozen=True)
class GehringRow:
    L: float
    capacity: float | None
    product: float | None
    note: str = ""


def gehring_condenser(L: float, n: int, h: float, start: float = 0.5) -> Condenser:
    """Radial segment ``[start, start + L] e_1``, one cell thick, inside the
    annulus ``1/4 < |x| < 2`` (the complement plays the unbounded plate)."""
    mirror = (False,) + (True,) * (n - 1)
    g0 = Grid.centered(n, 2.0 + 2 * h, h, mirror)
    r = g0.radius()
    x = g0.coords()
    on_axis = np.ones(g0.shape, bool)
    for k in range(1, n):
        on_axis &= np.abs(x[k]) < 0.5 * h
    seg = on_axis & (x[0] >= start - 1e-12) & (x[0] <= start + L + 1e-12)
    return Condenser(g0, seg, (r > 0.25) & (r < 2.0))


def gehring_probe(L_list: Sequence[float], n: int = 3, h: float = 1 / 16,
                  epsilon_factor: float = 1.0) -> list[GehringRow]:
    """``cap * (log(1 + 1/L))^{n-1}`` for segments of length L; too-short segments are skipped."""
    rows = []
    for L in L_list:
        if L <= 0:
            raise ValueError("segment lengths must be positive")
        if L < 2 * h:
            rows.append(GehringRow(L, None, None, f"skipped: L={L:g} below resolution 2h={2 * h:g}"))
            continue
        res = capacity(gehring_condenser(L, n, h), epsilon_factor * h)
        prod = res.value * math.log(1 + 1 / L) ** (n - 1)
        rows.append(GehringRow(L, res.value, prod, "" if res.converged else "solver did not converge"))
    return rows
