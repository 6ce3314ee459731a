"""Behaviour of functions near an isolated singularity.

Fields are probed through the quotient ``w(x) / log(1/|x|)`` on spheres
around the origin: its sphere minimum tends to the slope ``m`` of the
logarithmic singularity, and points where the quotient stays away from
``m`` form the exceptional set.  Both plain callables on point arrays
and :class:`ScalarField` objects are accepted wherever a field is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import Grid, ScalarField, as_function, sphere_nodes
from .thinness import PointSet


# -- cutoff -------------------------------------------------------------


@dataclass(frozen=True)
class CutoffSpec:
    alpha: float
    n: int

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be positive and finite")
        if self.n < 2:
            raise ValueError("dimension must be at least 2")

    @property
    def ceiling(self) -> float:
        return self.n * self.alpha


def cutoff_a(s, spec: CutoffSpec):
    """Concave cutoff: identity up to alpha, then ``alpha + int_alpha^s (alpha/t)^{n/(n-1)} dt``.

    Returns ``(a(s), a'(s))``.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("cutoff is defined for s >= 0")
    a, n = spec.alpha, spec.n
    with np.errstate(divide="ignore", over="ignore"):  # unselected branch only
        ratio = np.where(s > a, a / np.where(s > 0, s, 1.0), 1.0)
    val = np.where(s <= a, s, a + (n - 1) * a * (1 - ratio ** (1 / (n - 1))))
    der = np.where(s <= a, 1.0, ratio ** (n / (n - 1)))
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


def cutoff_second_derivative(s, spec: CutoffSpec):
    s = np.asarray(s, dtype=float)
    a, n = spec.alpha, spec.n
    safe = np.where(s > 0, s, 1.0)
    out = np.where(s <= a, 0.0, -(n / (n - 1)) * (a / safe) ** (n / (n - 1)) / safe)
    return float(out) if out.ndim == 0 else out


# -- blow-down ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlowDownField:
    scale: float
    field: ScalarField
    cut: ScalarField | None = None


def blow_down(w, r: float, n: int | None = None, annulus: tuple[float, float] = (0.5, 2.0),
              h: float = 1 / 16, alpha: float | None = None) -> BlowDownField:
    """``w_r(xi) = w(r xi) / log(1/r)`` sampled on an annulus in ``xi``.

    With ``alpha`` the cutoff ``a_alpha(w_r)`` is returned as well.
    """
    if not 0 < r < 1:
        raise ValueError("blow-down scale must lie in (0, 1)")
    n = w.grid.n if isinstance(w, ScalarField) else n
    if n is None:
        raise ValueError("dimension required for callable fields")
    f = as_function(w)
    g = Grid.annulus(n, annulus[0], annulus[1], h)
    dom = g.domain_mask()
    xi = g.points()[dom]
    vals = np.full(g.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        sampled = np.asarray(f(r * xi), dtype=float)
    if not np.all(np.isfinite(sampled)):
        raise ValueError("blow-down annulus leaves the field's domain")
    vals[dom] = sampled / math.log(1 / r)
    wr = ScalarField(g, vals, ~dom)
    cut = None
    if alpha is not None:
        spec = CutoffSpec(alpha, n)
        cv = np.full(g.shape, np.nan)
        cv[dom] = cutoff_a(np.maximum(vals[dom], 0.0), spec)[0]
        cut = ScalarField(g, cv, ~dom)
    return BlowDownField(r, wr, cut)


# -- quotient profile -----------------------------------------------------


@dataclass
class QuotientProfile:
    radii: np.ndarray
    minimum: np.ndarray
    median: np.ndarray
    maximum: np.ndarray
    gamma_minus: float
    m: float
    lower_constant: float
    fit_window: int
    n: int

    def is_monotone(self, tol: float = 1e-3) -> bool:
        """Sphere minimum nonincreasing as the radius decreases."""
        order = np.argsort(self.radii)[::-1]
        q = self.minimum[order]
        return bool(np.all(np.diff(q) <= tol))

    def rows(self):
        return list(zip(self.radii.tolist(), self.minimum.tolist(), self.median.tolist(), self.maximum.tolist()))


def log_radii(r_max: float, r_min: float, count: int) -> np.ndarray:
    return np.geomspace(r_max, r_min, count)


def extrapolate_limit(radii: np.ndarray, values: np.ndarray, window: int = 8) -> float:
    """Intercept of a linear fit of ``values`` against ``1/log(1/r)`` over the smallest radii."""
    order = np.argsort(radii)
    r = np.asarray(radii)[order][:window]
    v = np.asarray(values)[order][:window]
    x = 1.0 / np.log(1.0 / r)
    if r.size < 2:
        return float(v[0])
    return float(np.polyfit(x, v, 1)[1])


def _sphere_values(f, n: int, r: float, resolution: int, center=None) -> np.ndarray:
    pts, _ = sphere_nodes(n, r, resolution, center)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(f(pts), dtype=float)


def quotient_profile(w, radii: Sequence[float], n: int | None = None, resolution: int = 24,
                     window: int = 8) -> QuotientProfile:
    """Sphere statistics of ``w(x)/log(1/|x|)`` and the slope estimate.

    ``gamma_minus`` is the extrapolated limit of the sphere-minimum
    quotient.  ``m`` is the least-squares slope of the sphere minimum of
    ``w`` against ``log(1/r)``, which averages out bounded perturbations
    that the quotient only damps like ``1/log(1/r)``.  The lower constant
    ``C`` is the smallest with ``w >= m log(1/|x|) - C`` on the spheres.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 4:
        raise ValueError("need at least 4 radii")
    if np.any((radii <= 0) | (radii >= 1)):
        raise ValueError("radii must lie in (0, 1)")
    if isinstance(w, ScalarField):
        n = w.grid.n
        if np.any(radii < 2 * w.grid.h):
            raise ValueError("radii must stay two cells away from the singular cell")
    if n is None:
        raise ValueError("dimension required for callable fields")
    f = as_function(w)
    mins, meds, maxs, lows = [], [], [], []
    for r in radii:
        v = _sphere_values(f, n, r, resolution)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"field not finite on the sphere of radius {r:g}")
        q = v / math.log(1 / r)
        mins.append(q.min())
        meds.append(np.median(q))
        maxs.append(q.max())
        lows.append(v.min())
    mins = np.array(mins)
    gm = extrapolate_limit(radii, mins, window)
    L = np.log(1 / radii)
    lows = np.array(lows)
    if radii.size >= 4:
        A = np.stack([L, np.ones_like(L), radii], axis=1)
    else:
        A = np.stack([L, np.ones_like(L)], axis=1)
    m = float(np.linalg.lstsq(A, lows, rcond=None)[0][0])
    C = float(np.max(m * L - lows))
    return QuotientProfile(radii, mins, np.array(meds), np.array(maxs), gm, m, C, min(window, radii.size), n)


def default_tolerance(m: float) -> float:
    return 0.1 * abs(m) + 0.02


def exceptional_set(w, m: float, tol: float | None = None, n: int | None = None,
                    r_max: float = 1.0) -> PointSet:
    """Points of ``0 < |x| < r_max`` where ``|w/log(1/|x|) - m| > tol``.

    A ScalarField is looked up cell by cell (its singular cells are
    excluded); a callable is evaluated directly.
    """
    tol = default_tolerance(m) if tol is None else tol
    if isinstance(w, ScalarField):
        g = w.grid
        r = g.radius()
        with np.errstate(divide="ignore", invalid="ignore"):
            q = w.values / np.log(1 / r)
        mask = (r > 0) & (r < r_max) & ~w.singular & (np.abs(q - m) > tol)

        def pred(x, g=g, mask=mask):
            p = g.fold(np.asarray(x, dtype=float))
            idx = np.floor((p - np.asarray(g.origin)) / g.h + 0.5).astype(int)
            ok = np.all((idx >= 0) & (idx < np.asarray(g.shape)), axis=-1)
            idx = np.where(ok[..., None], idx, 0)
            return ok & mask[tuple(np.moveaxis(idx, -1, 0))]

        return PointSet(g.n, pred, (), (0.0,) * g.n)
    if n is None:
        raise ValueError("dimension required for callable fields")
    f = as_function(w)

    def pred(x, f=f):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        inside = (r > 0) & (r < r_max)
        out = np.zeros(r.shape, dtype=bool)
        if inside.any():
            xs = x[inside]
            rs = r[inside]
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.asarray(f(xs), dtype=float) / np.log(1 / rs)
            out[inside] = np.abs(q - m) > tol
        return out

    return PointSet(n, pred, (), (0.0,) * n)


# -- inversion ----------------------------------------------------------


def invert_points(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return y / r2


def inversion_transform(phi, R0: float = 1.0, h: float | None = None, n: int | None = None):
    """``w(y) = phi(y/|y|^2) - 2 log|y|``; the conformal factor of the pulled-back metric.

    For a callable, a callable is returned.  For a ScalarField defined on
    ``|x| >= R0``, a ScalarField on the ball ``|y| <= 1/R0`` is returned;
    cells whose image falls outside the data are flagged singular.
    """
    if not isinstance(phi, ScalarField):
        f = as_function(phi)

        def w(y, f=f):
            y = np.asarray(y, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.asarray(f(invert_points(y)), dtype=float) - 2 * np.log(np.linalg.norm(y, axis=-1))

        return w
    g = phi.grid
    n = g.n
    reach = float(np.min(np.abs(np.concatenate([np.asarray(g.origin)[~np.asarray(g.mirror)], g.upper()]))))
    if reach < 2 * R0:
        raise ValueError(f"field covers |x| <= {reach:g}; need at least 2*R0 = {2 * R0:g}")
    hy = h or g.h / R0**2
    gy = Grid.centered(n, 1 / R0, hy, g.mirror)
    y = gy.points()
    ry = gy.radius()
    ok = (ry >= 1 / reach) & (ry <= 1 / R0)
    vals = np.full(gy.shape, np.nan)
    x = invert_points(y[ok])
    vals[ok] = phi.sample(x, order=3) - 2 * np.log(ry[ok])
    bad = ~ok | ~np.isfinite(vals)
    return ScalarField(gy, np.where(bad, np.nan, vals), bad)


def slope_after_inversion(m1: float) -> float:
    """The slope at infinity recovered from the slope ``m1`` at the origin of the inverted field."""
    return 2.0 - m1


# -- diagnostics --------------------------------------------------------


@dataclass
class GrowthReport:
    fraction: float
    violations: np.ndarray
    C: float


def growth_condition_check(f: np.ndarray, w: np.ndarray, grad_w: np.ndarray, C: float, n: int,
                           rtol: float = 1e-12) -> GrowthReport:
    """Cells where ``0 <= f <= C |grad w|^{n-2} e^{2w}`` fails (finite cells only)."""
    f = np.asarray(f, dtype=float)
    w = np.asarray(w, dtype=float)
    gn = np.linalg.norm(np.asarray(grad_w, dtype=float), axis=-1)
    bound = C * gn ** (n - 2) * np.exp(2 * w)
    finite = np.isfinite(f) & np.isfinite(bound)
    ok = (f >= -rtol * np.abs(bound)) & (f <= bound * (1 + rtol) + rtol)
    viol = finite & ~ok
    frac = float(np.mean(ok[finite])) if finite.any() else 1.0
    return GrowthReport(frac, viol, C)


@dataclass
class LineIntegralReport:
    decades: np.ndarray
    increments: np.ndarray
    exponent: float
    divergent: bool


def ray_length_increments(w, direction: Sequence[float], r_max: float = 0.1, decades: int = 4,
                          per_decade: int = 64) -> LineIntegralReport:
    """Per-decade pieces of ``int e^{w(r theta)} dr`` toward the origin.

    For ``e^w ~ r^{-m}`` consecutive increments scale by ``10^{m-1}``; the
    fitted ``m`` is reported and the integral is flagged divergent when
    the increments do not decay (``m >= 1`` within 0.05).
    """
    f = as_function(w)
    th = np.asarray(direction, dtype=float)
    th = th / np.linalg.norm(th)
    inc = []
    edges = r_max * 10.0 ** -np.arange(decades + 1)
    xg, wg = np.polynomial.legendre.leggauss(8)
    for a, b in zip(edges[1:], edges[:-1]):
        sub = np.geomspace(a, b, per_decade + 1)
        total = 0.0
        for lo, hi in zip(sub[:-1], sub[1:]):
            t = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
            total += 0.5 * (hi - lo) * float(np.sum(wg * np.exp(f(t[:, None] * th[None]))))
        inc.append(total)
    inc = np.array(inc)
    k = np.arange(inc.size)
    slope = np.polyfit(k, np.log10(inc), 1)[0] if inc.size > 1 else 0.0
    exponent = 1.0 + float(slope)
    return LineIntegralReport(edges[1:], inc, exponent, exponent >= 0.95)


def infimum_diagnostic(w, points: np.ndarray, samples: int = 256, seed: int = 0) -> np.ndarray:
    """``inf_{B(x0, |x0|/2)} w / log(1/|x0|)`` for each point (random samples in the ball)."""
    f = as_function(w)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    rng = np.random.default_rng(seed)
    out = []
    for x0 in pts:
        r0 = float(np.linalg.norm(x0))
        d = rng.standard_normal((samples, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        s = 0.5 * r0 * rng.random(samples) ** (1 / n)
        v = np.asarray(f(x0 + s[:, None] * d), dtype=float)
        out.append(np.nanmin(v) / math.log(1 / r0))
    return np.array(out)
