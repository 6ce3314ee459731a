"""Dyadic capacity series for n-thinness, verdicts and escape rays.

A set E is probed annulus by annulus: ``E cap omega(x0, i)`` is mapped
onto the reference shell ``{1/2 <= |y| <= 1}`` (inside ``1/4 < |y| < 2``)
and its capacity is computed there, which is legitimate because
n-capacity is invariant under dilations.  Balls that are too small for
the reference grid are bounded analytically by the capacity of a
concentric condenser and added by subadditivity, so the series of an
unresolved piece is an upper bound.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .capacity import Condenser, annulus_capacity, capacity, radial_capacity
from .fields import Grid, dyadic_annuli, fibonacci_directions

REF_INNER = (0.5, 1.0)
REF_OUTER = (0.25, 2.0)
VERDICT_MARGIN = 0.2


class Verdict(str, Enum):
    THIN = "Thin"
    NOT_THIN = "NotThin"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True, eq=False)
class PointSet:
    """A set given by a point predicate and/or a list of closed balls.

    ``center`` is the point of interest (``None`` means infinity).
    ``mirror`` declares reflection symmetries through coordinate planes
    that the set has, which lets the capacity solves use reduced grids.
    """

    n: int
    predicate: Callable[[np.ndarray], np.ndarray] | None = None
    balls: tuple[tuple[tuple[float, ...], float], ...] = ()
    center: tuple[float, ...] | None = None
    mirror: tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple((tuple(float(v) for v in c), float(r)) for c, r in self.balls))
        if self.center is not None:
            object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.mirror:
            object.__setattr__(self, "mirror", (False,) * self.n)

    @property
    def is_empty(self) -> bool:
        return self.predicate is None and not self.balls

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        inside = np.zeros(p.shape[:-1], dtype=bool)
        if self.predicate is not None:
            inside |= np.asarray(self.predicate(p), dtype=bool)
        for c, r in self.balls:
            inside |= np.linalg.norm(p - np.asarray(c), axis=-1) <= r
        return inside

    def inverted(self) -> "PointSet":
        """Image under ``x -> x/|x|^2`` with the center sent to its image (0 <-> infinity)."""
        if self.center is not None and any(self.center):
            raise ValueError("inversion duality is only defined for the origin and infinity")
        pred = None if self.predicate is None else _inverted_predicate(self.predicate)
        balls = []
        for c, r in self.balls:
            c = np.asarray(c)
            d = float(c @ c) - r * r
            if d <= 0:
                raise ValueError("cannot invert a ball containing the origin")
            balls.append((tuple((c / d).tolist()), r / d))
        center = None if self.center is not None else (0.0,) * self.n
        return PointSet(self.n, pred, tuple(balls), center, self.mirror)


def _inverted_predicate(base):
    def pred(y):
        y = np.asarray(y, dtype=float)
        r2 = np.sum(y * y, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(r2 > 0, y / r2, np.inf)
        return base(x)

    return pred


@dataclass
class AnnulusEntry:
    i: int
    capacity: float
    upper_bound_only: bool
    resolved_cells: int
    analytic_balls: int


@dataclass
class ThinnessReport:
    n: int
    center: tuple[float, ...] | None
    entries: list[AnnulusEntry]
    verdict: Verdict
    slope: float | None
    h: float
    notes: list[str] = field(default_factory=list)

    @property
    def indices(self) -> np.ndarray:
        return np.array([e.i for e in self.entries])

    @property
    def capacities(self) -> np.ndarray:
        return np.array([e.capacity for e in self.entries])

    @property
    def terms(self) -> np.ndarray:
        i = self.indices.astype(float)
        return i ** (self.n - 1) * self.capacities

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.terms)

    def rows(self) -> list[tuple[int, float, float, float]]:
        return list(zip(self.indices.tolist(), self.capacities.tolist(), self.terms.tolist(),
                        self.partial_sums.tolist()))


def thin_verdict(indices: Sequence[int], capacities: Sequence[float], n: int, window: int = 8,
                 margin: float = VERDICT_MARGIN) -> tuple[Verdict, float | None]:
    """Decide convergence of ``sum i^{n-1} c_i`` from the trailing decay rate.

    The slope of ``log(i^{n-1} c_i)`` against ``log i`` over the last
    ``window`` indices is compared with -1.
    """
    i = np.asarray(indices, dtype=float)
    c = np.asarray(capacities, dtype=float)
    if i.size < 8:
        raise ValueError("need at least 8 indices for a verdict")
    if np.any(i <= 0):
        raise ValueError("indices must be positive for the log fit")
    i, c = i[-window:], c[-window:]
    if np.all(c <= 0):
        return Verdict.THIN, None
    if np.any(c <= 0):
        pos = c > 0
        if pos.sum() < 2:
            # isolated nonzero terms in a vanishing tail
            return Verdict.THIN, None
        i, c = i[pos], c[pos]
    y = np.log(i ** (n - 1) * c)
    slope = float(np.polyfit(np.log(i), y, 1)[0])
    if slope < -1 - margin:
        return Verdict.THIN, slope
    if slope > -1 + margin:
        return Verdict.NOT_THIN, slope
    return Verdict.INCONCLUSIVE, slope


def _reference_grid(n: int, h: float, mirror) -> Grid:
    return Grid.centered(n, REF_OUTER[1] + 2 * h, h, mirror)


def _to_original(E: PointSet, y: np.ndarray, scale: float) -> np.ndarray:
    """Reference coordinates to original ones for annulus index with the given scale."""
    if E.center is None:
        return y / scale
    return np.asarray(E.center) + y / scale


def _ball_to_reference(E: PointSet, c, r, scale):
    c = np.asarray(c, dtype=float)
    if E.center is not None:
        c = c - np.asarray(E.center)
    return c * scale, r * scale


def _ball_bound(n: int, c: np.ndarray, r: float) -> float | None:
    """Upper bound for the capacity of ``B(c, r) cap omega`` in the reference condenser."""
    d = float(np.linalg.norm(c))
    a, b = REF_INNER
    if d + r < a or d - r > b:
        return 0.0
    lo, hi = REF_OUTER
    gap = min(d - lo, hi - d)
    if gap <= r:
        return None
    return radial_capacity(n, r, gap)


class _CapacityCache:
    def __init__(self):
        self.store: dict[bytes, float] = {}

    def __call__(self, grid: Grid, mask: np.ndarray, domain: np.ndarray, eps) -> float:
        key = np.packbits(mask).tobytes() + repr((grid, eps)).encode()
        if key not in self.store:
            self.store[key] = capacity(Condenser(grid, mask, domain), eps).value
        return self.store[key]


def thinness_series(E: PointSet, i_min: int, i_max: int, h: float = 1 / 16, epsilon: float | None = None,
                    threads: int = 1, window: int = 8) -> ThinnessReport:
    """Per-annulus capacities ``c_i = cap_n(E cap omega_i, Omega_i)`` and the verdict."""
    n = E.n
    annuli = dyadic_annuli(E.center, i_min, i_max)
    grid = _reference_grid(n, h, E.mirror)
    y = grid.points()
    r = grid.radius()
    inner = (r >= REF_INNER[0]) & (r <= REF_INNER[1])
    domain = (r > REF_OUTER[0]) & (r < REF_OUTER[1])
    cache = _CapacityCache()
    notes = []

    def one(i: int) -> AnnulusEntry:
        s = annuli.scale(i)
        mask = np.zeros(grid.shape, dtype=bool)
        if E.predicate is not None:
            pts = _to_original(E, y[inner], s)
            mask[inner] = np.asarray(E.predicate(pts), dtype=bool)
        bound = 0.0
        analytic = 0
        for c, rad in E.balls:
            cr, rr = _ball_to_reference(E, c, rad, s)
            if rr >= 2 * h:
                mask |= inner & (np.linalg.norm(y - cr, axis=-1) <= rr)
                continue
            b = _ball_bound(n, cr, rr)
            if b is None:
                mask |= inner & (np.linalg.norm(y - cr, axis=-1) <= max(rr, 0.5 * h))
                continue
            if b > 0:
                bound += b
                analytic += 1
        cap = cache(grid, mask, domain, epsilon) if mask.any() else 0.0
        return AnnulusEntry(i, cap + bound, analytic > 0, int(mask.sum()), analytic)

    idx = list(annuli.indices)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(one, idx))
    else:
        entries = [one(i) for i in idx]
    if any(e.upper_bound_only for e in entries):
        notes.append("sub-resolution balls bounded analytically; those terms are upper bounds")
    pos_idx = [e.i for e in entries if e.i > 0]
    verdict, slope = Verdict.INCONCLUSIVE, None
    if len(pos_idx) >= 8:
        sel = [e for e in entries if e.i > 0]
        verdict, slope = thin_verdict([e.i for e in sel], [e.capacity for e in sel], n, window)
    else:
        notes.append("fewer than 8 positive indices; no verdict")
    return ThinnessReport(n, E.center, entries, verdict, slope, h, notes)


def full_shell_capacity(n: int) -> float:
    """Exact capacity of the reference shell inside the reference domain."""
    return annulus_capacity(n, REF_INNER[0], REF_INNER[1], REF_OUTER[0], REF_OUTER[1])


@dataclass
class EscapeRay:
    direction: np.ndarray
    r0: float
    i0: int
    clearance: float
    shadow_area: list[float]


def _shadow(E: PointSet, i: int, s: float, dirs: np.ndarray, grid: Grid, inner_pts: np.ndarray) -> np.ndarray:
    """Directions lying in the radial projection of (scaled E) cap omega(0,0)."""
    covered = np.zeros(len(dirs), dtype=bool)
    a, b = REF_INNER
    for c, rad in E.balls:
        cr, rr = _ball_to_reference(E, c, rad, s)
        cr = np.asarray(cr)
        d = float(np.linalg.norm(cr))
        if d + rr < a or d - rr > b:
            continue
        if rr >= d:
            covered[:] = True
            continue
        half = math.asin(rr / d)
        covered |= dirs @ (cr / d) >= math.cos(half)
    if E.predicate is not None and inner_pts.size:
        hit = np.asarray(E.predicate(_to_original(E, inner_pts, s)), dtype=bool)
        if hit.any():
            p = inner_pts[hit]
            u = p / np.linalg.norm(p, axis=1, keepdims=True)
            tol = math.cos(1.5 * grid.h / a)
            for chunk in np.array_split(np.arange(len(dirs)), max(1, len(dirs) // 512)):
                covered[chunk] |= np.any(dirs[chunk] @ u.T >= tol, axis=1)
    return covered


def ray_escape(E: PointSet, i_min: int, i_max: int, count: int = 2000, h: float = 1 / 16,
               seed: int = 0) -> EscapeRay | None:
    """Find a direction avoiding the shadows of ``E`` on all annuli ``i >= i0``.

    Tries ``i0 = i_min, i_min + 1, ...`` and returns the first workable
    one with the candidate of largest angular clearance, or ``None`` if
    the shadows cover the sphere for every start index.
    """
    n = E.n
    annuli = dyadic_annuli(E.center, i_min, i_max)
    dirs = fibonacci_directions(n, count, seed)
    if E.is_empty:
        return EscapeRay(dirs[0], _start_radius(E, i_min), i_min, math.pi, [0.0] * len(annuli.indices))
    grid = Grid.centered(n, REF_INNER[1] + h, h)
    r = grid.radius()
    inner_pts = grid.points()[(r >= REF_INNER[0]) & (r <= REF_INNER[1])]
    shadows = [_shadow(E, i, annuli.scale(i), dirs, grid, inner_pts) for i in annuli.indices]
    areas = [float(s.mean()) for s in shadows]
    for k, i0 in enumerate(annuli.indices):
        covered = np.any(shadows[k:], axis=0)
        free = np.flatnonzero(~covered)
        if free.size == 0:
            continue
        # clearance: angle to the nearest covered candidate
        cov = dirs[covered]
        if cov.size == 0:
            best, clear = free[0], math.pi
        else:
            cos = np.clip(dirs[free] @ cov.T, -1.0, 1.0).max(axis=1)
            j = int(np.argmin(cos))
            best, clear = free[j], float(np.arccos(cos[j]))
        return EscapeRay(dirs[best], _start_radius(E, i0), i0, clear, areas)
    return None


def _start_radius(E: PointSet, i0: int) -> float:
    return 2.0 ** (-i0) if E.center is not None else 2.0**i0


def ball_chain(n: int, i_min: int, i_max: int, radius_fn: Callable[[int], float] | None = None) -> PointSet:
    """Balls ``B(2^{-i} e_1, 2^{-i} rho_i)`` with ``rho_i = exp(-i^2)`` by default."""
    rho = radius_fn or (lambda i: math.exp(-i * i))
    balls = []
    for i in range(i_min, i_max + 1):
        c = np.zeros(n)
        c[0] = 2.0 ** (-i)
        balls.append((tuple(c.tolist()), 2.0 ** (-i) * rho(i)))
    return PointSet(n, None, tuple(balls), (0.0,) * n, (False,) + (True,) * (n - 1))


def solid_annuli(n: int) -> PointSet:
    """Union of all ``omega(0, i)``, i.e. the punctured unit ball."""
    def pred(x):
        r = np.linalg.norm(x, axis=-1)
        return (r > 0) & (r <= 1.0)

    return PointSet(n, pred, (), (0.0,) * n, (True,) * n)
