"""Structured grids, sampled fields, Radon measures and dyadic annuli.

Every other module works on the objects defined here.  Grids are
axis-aligned boxes of cells; a value lives at each cell center.  A grid
may be *mirrored* along some axes: it then stores only the part of a
reflection-symmetric configuration with nonnegative coordinates on those
axes, and integrals are taken over the full symmetric domain by weighting
each cell with the number of its distinct mirror images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.special import gamma

SUPPORTED_DIMENSIONS = (2, 3, 4)


def sphere_area(n: int) -> float:
    """Area of the unit sphere S^{n-1} in R^n (often written omega_{n-1})."""
    return 2.0 * math.pi ** (n / 2) / gamma(n / 2)


def ball_volume(n: int, t: float | np.ndarray = 1.0):
    return sphere_area(n) / n * np.asarray(t, dtype=float) ** n


@dataclass(frozen=True)
class Grid:
    """Uniform cell grid in R^n.

    Cell ``k`` has center ``origin + k*h`` and covers the half-open box
    ``[center - h/2, center + h/2)`` (closed on the lower face).

    ``region`` optionally restricts the meaningful domain to an annulus
    ``r_in <= |x| <= r_out`` about the coordinate origin.
    """

    n: int
    shape: tuple[int, ...]
    h: float
    origin: tuple[float, ...]
    mirror: tuple[bool, ...] = ()
    region: tuple[float, float] | None = None

    def __post_init__(self):
        if self.n not in SUPPORTED_DIMENSIONS:
            raise ValueError(f"dimension {self.n} not supported (use one of {SUPPORTED_DIMENSIONS})")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if len(self.shape) != self.n or len(self.origin) != self.n:
            raise ValueError("shape and origin must have one entry per dimension")
        if any(s < 2 for s in self.shape):
            raise ValueError("need at least two cells per axis")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if not self.mirror:
            object.__setattr__(self, "mirror", (False,) * self.n)
        object.__setattr__(self, "mirror", tuple(bool(m) for m in self.mirror))
        for axis, m in enumerate(self.mirror):
            if m and self.origin[axis] != 0.0:
                raise ValueError("a mirrored axis must start at coordinate 0")
        if self.region is not None:
            r_in, r_out = self.region
            if not 0 <= r_in < r_out:
                raise ValueError("annulus requires 0 <= r_in < r_out")
            object.__setattr__(self, "region", (float(r_in), float(r_out)))

    # -- constructors -------------------------------------------------
    @classmethod
    def centered(cls, n: int, half_width: float, h: float, mirror: bool | Sequence[bool] = False) -> "Grid":
        """Cube ``[-L, L]^n`` with a cell centered at the origin.

        With ``mirror`` the grid keeps only ``[0, L]`` on the mirrored axes.
        """
        if isinstance(mirror, bool):
            mirror = (mirror,) * n
        m = int(math.ceil(half_width / h - 1e-9))
        shape = tuple(m + 1 if mi else 2 * m + 1 for mi in mirror)
        origin = tuple(0.0 if mi else -m * h for mi in mirror)
        return cls(n, shape, h, origin, tuple(mirror))

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], h: float) -> "Grid":
        lower = [float(v) for v in lower]
        upper = [float(v) for v in upper]
        shape = tuple(int(math.floor((b - a) / h + 1e-9)) + 1 for a, b in zip(lower, upper))
        return cls(len(lower), shape, h, tuple(lower))

    @classmethod
    def annulus(cls, n: int, r_in: float, r_out: float, h: float, mirror: bool | Sequence[bool] = False) -> "Grid":
        g = cls.centered(n, r_out, h, mirror)
        return cls(g.n, g.shape, g.h, g.origin, g.mirror, (r_in, r_out))

    # -- geometry -----------------------------------------------------
    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + np.arange(self.shape[k]) * self.h

    def cell_center(self, index: Sequence[int]) -> np.ndarray:
        return np.array([self.origin[k] + int(index[k]) * self.h for k in range(self.n)])

    def coords(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis(k) for k in range(self.n)], indexing="ij")

    def points(self) -> np.ndarray:
        """Cell centers as an array of shape ``(*shape, n)``."""
        return np.stack(self.coords(), axis=-1)

    def radius(self, center: Sequence[float] | None = None) -> np.ndarray:
        c = np.zeros(self.n) if center is None else np.asarray(center, dtype=float)
        r2 = np.zeros(self.shape)
        for k, x in enumerate(self.coords()):
            r2 += (x - c[k]) ** 2
        return np.sqrt(r2)

    def fold(self, points: np.ndarray) -> np.ndarray:
        """Map points into the stored part of a mirrored grid."""
        p = np.array(points, dtype=float, copy=True)
        for k, m in enumerate(self.mirror):
            if m:
                p[..., k] = np.abs(p[..., k])
        return p

    def cell_index(self, point: Sequence[float]) -> tuple[int, ...] | None:
        """Index of the cell containing ``point`` or ``None`` outside the grid."""
        p = self.fold(np.asarray(point, dtype=float))
        idx = np.floor((p - np.asarray(self.origin)) / self.h + 0.5).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.shape)):
            return None
        return tuple(int(i) for i in idx)

    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(self.shape) - 1) * self.h

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Whether folded points lie within the span of cell centers."""
        p = self.fold(np.asarray(points, dtype=float))
        lo = np.asarray(self.origin) + margin
        hi = self.upper() - margin
        lo = np.where(self.mirror, -np.inf, lo)
        return np.all((p >= lo - 1e-12) & (p <= hi + 1e-12), axis=-1)

    def multiplicity(self) -> np.ndarray:
        """Number of distinct mirror images of every cell."""
        mult = np.ones(self.shape)
        for k, (m, x) in enumerate(zip(self.mirror, self.coords())):
            if m:
                mult = mult * np.where(x > 0, 2.0, 1.0)
        return mult

    @property
    def symmetry_factor(self) -> int:
        return 2 ** sum(self.mirror)

    def cell_weights(self) -> np.ndarray:
        """Volume represented by each cell, counting mirror images."""
        return self.multiplicity() * self.h**self.n

    def domain_mask(self) -> np.ndarray:
        if self.region is None:
            return np.ones(self.shape, dtype=bool)
        r = self.radius()
        r_in, r_out = self.region
        return (r >= r_in) & (r <= r_out)

    def box_boundary(self) -> np.ndarray:
        """Cells on the outer faces of the box, excluding mirror planes."""
        edge = np.zeros(self.shape, dtype=bool)
        for k in range(self.n):
            sl = [slice(None)] * self.n
            sl[k] = -1
            edge[tuple(sl)] = True
            if not self.mirror[k]:
                sl[k] = 0
                edge[tuple(sl)] = True
        return edge

    def with_spacing(self, h: float) -> "Grid":
        """Grid of the same extent about the origin with a new spacing."""
        half = float(np.max(np.abs(np.concatenate([np.asarray(self.origin), self.upper()]))))
        g = Grid.centered(self.n, half, h, self.mirror)
        return Grid(g.n, g.shape, g.h, g.origin, g.mirror, self.region)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values on the cells of a grid.

    ``singular`` flags cells where the value is not finite (for example
    the origin cell of ``log(1/|x|)``); every other value must be finite.
    """

    grid: Grid
    values: np.ndarray
    singular: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        bad = ~np.isfinite(v)
        sing = bad if self.singular is None else (np.asarray(self.singular, dtype=bool) | bad)
        object.__setattr__(self, "values", _freeze(v))
        object.__setattr__(self, "singular", _freeze(sing))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        with np.errstate(divide="ignore", invalid="ignore"):
            return cls(grid, fn(grid.points()))

    @property
    def has_singular(self) -> bool:
        return bool(self.singular.any())

    def finite_values(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.singular, fill, self.values)

    def sample(self, points: np.ndarray, order: int = 1) -> np.ndarray:
        """Interpolate at arbitrary points; NaN outside the grid."""
        return _interpolate(self.grid, self.finite_values(), points, order)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.sample(points)

    def integral(self, mask: np.ndarray | None = None) -> float:
        w = self.grid.cell_weights()
        v = self.finite_values()
        if mask is not None:
            w = w * mask
        return float(np.sum(w * v))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    values: np.ndarray
    singular: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (*self.grid.shape, self.grid.n):
            raise ValueError("vector field must carry one n-vector per cell")
        sing = np.zeros(self.grid.shape, bool) if self.singular is None else np.asarray(self.singular, bool)
        object.__setattr__(self, "values", _freeze(v))
        object.__setattr__(self, "singular", _freeze(sing | ~np.all(np.isfinite(v), axis=-1)))

    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)

    def sample(self, points: np.ndarray, order: int = 1) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.empty(pts.shape[:-1] + (self.grid.n,))
        signs = np.where(np.asarray(self.grid.mirror) & (pts < 0), -1.0, 1.0)
        vals = np.where(self.singular[..., None], 0.0, self.values)
        for k in range(self.grid.n):
            out[..., k] = _interpolate(self.grid, vals[..., k], pts, order) * signs[..., k]
        return out


def _interpolate(grid: Grid, values: np.ndarray, points: np.ndarray, order: int) -> np.ndarray:
    pts = grid.fold(np.asarray(points, dtype=float))
    flat = pts.reshape(-1, grid.n)
    idx = (flat - np.asarray(grid.origin)) / grid.h
    inside = grid.contains(flat)
    mode = "mirror" if any(grid.mirror) else "nearest"
    out = ndimage.map_coordinates(values, idx.T, order=order, mode=mode)
    out = np.where(inside, out, np.nan)
    return out.reshape(pts.shape[:-1])


def as_function(f) -> Callable[[np.ndarray], np.ndarray]:
    """Uniform point-evaluation interface for fields and plain callables."""
    if isinstance(f, ScalarField):
        return f.sample
    if callable(f):
        return f
    raise TypeError("expected a ScalarField or a callable on point arrays")


def gradient(f: ScalarField) -> VectorField:
    """Central differences inside, one-sided at the box faces.

    Mirror planes use the even reflection of the field.  Cells whose
    stencil touches a singular cell are flagged singular in the result.
    """
    g = f.grid
    v = f.finite_values()
    pad = [(1, 0) if m else (0, 0) for m in g.mirror]
    if any(g.mirror):
        v = np.pad(v, pad, mode="reflect")
    comps = np.gradient(v, g.h, edge_order=1) if g.n > 1 else [np.gradient(v, g.h)]
    strip = tuple(slice(1, None) if m else slice(None) for m in g.mirror)
    out = np.stack([c[strip] for c in comps], axis=-1)
    flagged = f.singular
    if flagged.any():
        flagged = ndimage.binary_dilation(flagged, ndimage.generate_binary_structure(g.n, 1))
    return VectorField(g, out, flagged)


@dataclass(frozen=True, eq=False)
class RadonMeasure:
    """Nonnegative measure: point atoms plus an optional density field."""

    atoms: tuple[tuple[np.ndarray, float], ...] = ()
    density: ScalarField | None = None

    def __post_init__(self):
        kept = []
        for point, mass in self.atoms:
            mass = float(mass)
            if mass < 0 or not math.isfinite(mass):
                raise ValueError("atom masses must be finite and nonnegative")
            if mass > 0:
                kept.append((_freeze(np.asarray(point, dtype=float)), mass))
        object.__setattr__(self, "atoms", tuple(kept))
        if self.density is not None:
            d = self.density
            if d.has_singular or np.any(d.values < 0):
                raise ValueError("density must be finite and nonnegative")

    @classmethod
    def dirac(cls, point: Sequence[float], mass: float = 1.0) -> "RadonMeasure":
        return cls(((np.asarray(point, dtype=float), mass),))

    @classmethod
    def zero(cls) -> "RadonMeasure":
        return cls()

    @property
    def dimension(self) -> int | None:
        if self.density is not None:
            return self.density.grid.n
        if self.atoms:
            return int(self.atoms[0][0].size)
        return None

    def total_mass(self) -> float:
        m = sum(mass for _, mass in self.atoms)
        if self.density is not None:
            m += self.density.integral()
        return float(m)

    def scaled(self, c: float) -> "RadonMeasure":
        dens = None if self.density is None else ScalarField(self.density.grid, c * self.density.values)
        return RadonMeasure(tuple((p, c * m) for p, m in self.atoms), dens)

    def __add__(self, other: "RadonMeasure") -> "RadonMeasure":
        if self.density is not None and other.density is not None:
            if self.density.grid != other.density.grid:
                raise ValueError("densities live on different grids")
            dens = ScalarField(self.density.grid, self.density.values + other.density.values)
        else:
            dens = self.density if self.density is not None else other.density
        return RadonMeasure(self.atoms + other.atoms, dens)

    def density_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell centers (all mirror images unfolded) and the mass of each."""
        if self.density is None:
            return np.zeros((0, self.dimension or 1)), np.zeros(0)
        g = self.density.grid
        vals = self.density.values
        keep = vals > 0
        pts = g.points()[keep]
        mass = vals[keep] * g.h**g.n
        for k, m in enumerate(g.mirror):
            if m:
                off = pts[:, k] > 0
                img = pts[off].copy()
                img[:, k] *= -1
                pts = np.concatenate([pts, img])
                mass = np.concatenate([mass, mass[off]])
        return pts, mass

    def load_vector(self, grid: Grid) -> np.ndarray:
        """Linear functional ``u -> int u dmu`` as per-cell weights on ``grid``.

        Atoms give their whole mass to their host cell; a density on the
        same grid contributes ``f * cell volume`` (mirror images counted).
        """
        b = np.zeros(grid.shape)
        for point, mass in self.atoms:
            idx = grid.cell_index(point)
            if idx is None:
                raise ValueError(f"atom at {point.tolist()} lies outside the grid")
            b[idx] += mass
        if self.density is not None:
            if self.density.grid != grid:
                raise ValueError("density must live on the solve grid")
            b += self.density.values * grid.cell_weights()
        return b


def _host_cell(measure: RadonMeasure, x: np.ndarray):
    d = measure.density
    if d is None:
        return None, 0.0
    idx = d.grid.cell_index(x)
    if idx is None:
        return None, 0.0
    return d.grid.cell_center(idx), float(d.values[idx] * d.grid.h**d.grid.n)


class BallMassProfile:
    """``t -> mu(B(x, t))`` for a fixed center, precomputed for fast queries.

    Density cells count as point masses at their centers (closed balls),
    except the cell hosting ``x`` whose mass is spread uniformly, so that
    ``mu(B(x, t)) = f(x) |B_t|`` below the cell scale.
    """

    def __init__(self, measure: RadonMeasure, x: Sequence[float]):
        x = np.asarray(x, dtype=float)
        self.x = x
        self.n = x.size
        adist = np.array([np.linalg.norm(p - x) for p, _ in measure.atoms])
        order = np.argsort(adist, kind="stable")
        self.atom_dist = adist[order]
        masses = np.array([m for _, m in measure.atoms])
        self.atom_cum = np.cumsum(masses[order]) if masses.size else np.zeros(0)
        pts, mass = measure.density_points()
        host_center, host_mass = _host_cell(measure, x)
        self.host_mass = 0.0
        self.cell_volume = 0.0
        if host_center is not None and host_mass > 0:
            is_host = np.all(np.abs(pts - host_center) < 1e-12 * max(1.0, np.abs(host_center).max()), axis=1)
            mass = np.where(is_host, 0.0, mass)
            self.host_mass = host_mass
            g = measure.density.grid
            self.cell_volume = g.h**g.n
        if pts.shape[0]:
            dist = np.linalg.norm(pts - x, axis=1)
            order = np.argsort(dist, kind="stable")
            self.dens_dist = dist[order]
            self.dens_cum = np.cumsum(mass[order])
        else:
            self.dens_dist = np.zeros(0)
            self.dens_cum = np.zeros(0)
        self.total = float((self.atom_cum[-1] if self.atom_cum.size else 0.0)
                           + (self.dens_cum[-1] if self.dens_cum.size else 0.0) + self.host_mass)

    @staticmethod
    def _step(dist, cum, t):
        if dist.size == 0:
            return np.zeros_like(t)
        k = np.searchsorted(dist, t, side="right")
        return np.where(k > 0, cum[np.maximum(k - 1, 0)], 0.0)

    def atoms_at_center(self, tol: float = 0.0) -> float:
        """Mass of atoms located at the center itself (within ``tol``)."""
        hit = self.atom_dist <= tol
        return float(self.atom_cum[hit][-1]) if hit.any() else 0.0

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        m = self._step(self.atom_dist, self.atom_cum, t) + self._step(self.dens_dist, self.dens_cum, t)
        if self.host_mass:
            frac = np.minimum(1.0, ball_volume(self.n, t) / self.cell_volume)
            m = m + self.host_mass * frac
        return m

    def breakpoints(self) -> np.ndarray:
        """Radii where the profile jumps (atoms and non-host density cells)."""
        return np.concatenate([self.atom_dist, self.dens_dist])


def ball_mass(measure: RadonMeasure, x: Sequence[float], t: float) -> float:
    """Mass of the closed ball ``B(x, t)``."""
    if t < 0:
        raise ValueError("radius must be nonnegative")
    return float(BallMassProfile(measure, x)(t))


@dataclass(frozen=True)
class Annulus:
    """``{r_in <= |x - c| <= r_out}`` when closed, strict inequalities otherwise."""

    center: tuple[float, ...] | None
    r_in: float
    r_out: float
    closed: bool

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        c = np.zeros(p.shape[-1]) if self.center is None else np.asarray(self.center)
        r = np.linalg.norm(p - c, axis=-1)
        if self.closed:
            return (r >= self.r_in) & (r <= self.r_out)
        return (r > self.r_in) & (r < self.r_out)


@dataclass(frozen=True)
class DyadicAnnuli:
    """Annuli ``omega(x0, i)`` inside ``Omega(x0, i)``; ``center=None`` is infinity."""

    center: tuple[float, ...] | None
    i_min: int
    i_max: int
    inner: tuple[Annulus, ...] = field(repr=False)
    outer: tuple[Annulus, ...] = field(repr=False)

    @property
    def indices(self) -> range:
        return range(self.i_min, self.i_max + 1)

    def pair(self, i: int) -> tuple[Annulus, Annulus]:
        k = i - self.i_min
        return self.inner[k], self.outer[k]

    def scale(self, i: int) -> float:
        """Factor mapping ``omega(., i)`` onto the reference annulus ``omega(0, 0)``."""
        return 2.0**i if self.center is not None else 2.0 ** (-i - 1)


def dyadic_annuli(center: Sequence[float] | None, i_min: int, i_max: int) -> DyadicAnnuli:
    if i_min > i_max:
        raise ValueError("i_min must not exceed i_max")
    c = None if center is None else tuple(float(v) for v in center)
    inner, outer = [], []
    for i in range(i_min, i_max + 1):
        if c is not None:
            inner.append(Annulus(c, 2.0 ** (-i - 1), 2.0 ** (-i), True))
            outer.append(Annulus(c, 2.0 ** (-i - 2), 2.0 ** (-i + 1), False))
        else:
            inner.append(Annulus(None, 2.0**i, 2.0 ** (i + 1), True))
            outer.append(Annulus(None, 2.0 ** (i - 1), 2.0 ** (i + 2), False))
    return DyadicAnnuli(c, i_min, i_max, tuple(inner), tuple(outer))


def sphere_nodes(n: int, radius: float = 1.0, resolution: int = 64,
                 center: Sequence[float] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Latitude-longitude midpoint nodes and weights on a sphere in R^n.

    ``resolution`` is the number of intervals in each polar angle; the
    azimuth uses twice as many.  Weights sum to the exact sphere area.
    """
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    m_az = 2 * resolution
    az = (np.arange(m_az) + 0.5) * 2 * np.pi / m_az
    polar = (np.arange(resolution) + 0.5) * np.pi / resolution
    grids = np.meshgrid(*([polar] * (n - 2) + [az]), indexing="ij")
    angles = [g.ravel() for g in grids]
    x = np.ones((angles[0].size, n))
    w = np.ones(angles[0].size)
    s = np.ones(angles[0].size)
    for k in range(n - 2):
        x[:, k] = s * np.cos(angles[k])
        s = s * np.sin(angles[k])
        w = w * np.sin(angles[k]) ** (n - 2 - k)
    x[:, n - 2] = s * np.cos(angles[-1])
    x[:, n - 1] = s * np.sin(angles[-1])
    w = w / w.sum() * sphere_area(n) * radius ** (n - 1)
    return c + radius * x, w


def fibonacci_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Nearly uniform unit vectors (golden-angle spiral for n=3, angles for n=2)."""
    if n == 2:
        th = (np.arange(count) + 0.5) * 2 * np.pi / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if n == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = math.pi * (1 + 5**0.5) * k
        r = np.sqrt(1 - z**2)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def dilate(mask: np.ndarray, cells: int) -> np.ndarray:
    if cells <= 0:
        return mask.copy()
    st = ndimage.generate_binary_structure(mask.ndim, mask.ndim)
    return ndimage.binary_dilation(mask, st, iterations=cells)

