"""Conformally flat metrics e^{2 phi}|dx|^2 and hypersurface graphs in hyperbolic space.

For a conformal factor phi on R^n the Ricci curvature in the direction of
grad phi is read off from the n-Laplacian,

    -Delta_n phi = Ric(grad phi) |grad phi|^{n-2} e^{2 phi},

so its total mass, i.e. the flux of |grad phi|^{n-2} grad phi through
large spheres, gives the asymptotic slope ``m`` (as ``m^{n-1} omega``).

Hypersurfaces are graphs ``x -> rho(x)`` in Busemann (half-space)
coordinates where the metric is ``e^{-2 rho}|dx|^2 + d rho^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .asymptotics import inversion_transform, quotient_profile, slope_after_inversion
from .fields import Grid, ScalarField, as_function, sphere_area, sphere_nodes
from .nlaplace import flux_through_sphere, n_laplacian


# -- conformal metrics ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    """``e^{2 phi}|dx|^2`` with ``phi`` a ScalarField or a callable on point arrays."""

    phi: object
    n: int

    def __post_init__(self):
        if isinstance(self.phi, ScalarField):
            if self.phi.grid.n != self.n:
                raise ValueError("dimension mismatch")
        elif not callable(self.phi):
            raise TypeError("phi must be a ScalarField or callable")

    def sample(self, points):
        return as_function(self.phi)(points)


def capped_log_profile(m: float, delta: float = 0.1):
    """``phi(x) = -(m/2) log(|x|^2 + delta^2)``: smooth, and ``~ -m log|x|`` at infinity."""

    def phi(x):
        x = np.asarray(x, dtype=float)
        return -0.5 * m * np.log(np.sum(x * x, axis=-1) + delta * delta)

    return phi


def capped_profile_flux(m: float, delta: float, R: float, n: int) -> float:
    """Exact ``-oint |grad phi|^{n-2} d phi/d nu`` for the capped profile, divided by omega."""
    return m ** (n - 1) * (R * R / (R * R + delta * delta)) ** (n - 1)


@dataclass
class DensityReport:
    density: ScalarField
    violations: np.ndarray
    tol: float

    @property
    def nonnegative(self) -> bool:
        return not self.violations.any()


def ricci_direction_density(g: ConformalMetric, grid: Grid | None = None, tol: float = 1e-8) -> DensityReport:
    """``-Delta_n phi`` on the grid (the Ricci-direction density) and its negative cells."""
    if isinstance(g.phi, ScalarField):
        phi = g.phi
    else:
        if grid is None:
            raise ValueError("a grid is needed to sample a callable phi")
        phi = ScalarField.from_function(grid, g.phi)
    lap = n_laplacian(phi, 0.0)
    dens = ScalarField(phi.grid, -lap.values, lap.singular)
    viol = ~dens.singular & (dens.finite_values() < -tol)
    return DensityReport(dens, viol, tol)


@dataclass
class FluxSlope:
    radii: np.ndarray
    s: np.ndarray
    m: float
    stable: bool
    consistent_sign: bool


def _signed_root(s: float, n: int) -> float:
    return math.copysign(abs(s) ** (1 / (n - 1)), s)


def flux_m(g: ConformalMetric, radii: Sequence[float], resolution: int = 48, spread_tol: float = 0.05) -> FluxSlope:
    """Slope ``m`` from ``s(R) = flux(phi, R)/omega``, extrapolated in ``1/R^2``."""
    radii = np.asarray(radii, dtype=float)
    n = g.n
    if isinstance(g.phi, ScalarField):
        s = np.array([flux_through_sphere(g.phi, R, resolution=resolution) for R in radii])
    else:
        s = np.array([flux_through_sphere(g.phi, R, np.zeros(n), resolution) for R in radii])
    s = s / sphere_area(n)
    ms = np.array([_signed_root(v, n) for v in s])
    if radii.size >= 2:
        m = float(np.polyfit(1 / radii**2, ms, 1)[1])
    else:
        m = float(ms[0])
    stable = bool(np.ptp(ms[-min(3, ms.size):]) <= spread_tol)
    return FluxSlope(radii, s, m, stable, m >= -spread_tol)


def profile_m(g: ConformalMetric, r_max: float = 1e-1, decades: float = 4, count: int = 16) -> float:
    """Slope of ``phi`` against ``-log|x|`` at infinity via inversion and the quotient profile.

    A gridded ``phi`` only covers a bounded box, so the sampled radii in
    the inverted picture are clipped to the part its data reaches.
    """
    if isinstance(g.phi, ScalarField):
        w = inversion_transform(g.phi, R0=1.0)
        ok = ~w.singular & (w.grid.radius() > 0)
        r_lo = float(w.grid.radius()[ok].min()) + 2 * w.grid.h
        if r_lo > 0.5e-2:
            raise ValueError("gridded phi must reach |x| >= 200 for a slope fit; pass a callable instead")
        radii = np.geomspace(min(r_max, 0.5), r_lo, count)
        prof = quotient_profile(lambda y, w=w: w.sample(y, order=3), radii, n=g.n)
    else:
        w = inversion_transform(g.phi)
        prof = quotient_profile(w, np.geomspace(r_max, r_max * 10.0**-decades, count), n=g.n)
    return slope_after_inversion(prof.m)


@dataclass(frozen=True)
class ExhaustionDomainSpec:
    m: float
    eps: float
    t: float
    sign: int = 1

    def __post_init__(self):
        if self.eps <= 0 or self.t <= 0:
            raise ValueError("eps and t must be positive")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def barrier(self, x: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        with np.errstate(divide="ignore"):
            lg = np.maximum(np.log(np.where(r > 0, r, 1.0)), 0.0)
        return -(self.m + self.sign * self.eps) * lg + self.sign * self.t


@dataclass
class ExhaustionRegion:
    mask: np.ndarray
    contains_origin: bool
    bounded: bool
    asserted_bounded: bool
    note: str = ""


def exhaustion_domain(phi: ScalarField, spec: ExhaustionDomainSpec, exceptional_thin: bool | None = None) -> ExhaustionRegion:
    """Component of ``{G(x) > phi(x)}`` containing the origin.

    The component is unbounded at this resolution when it reaches the
    grid boundary.  For the minus sign boundedness is only asserted when
    the caller certifies that the exceptional set is thin.
    """
    g = phi.grid
    G = spec.barrier(g.points())
    above = (G > phi.values) & ~phi.singular
    origin = g.cell_index(np.zeros(g.n))
    if origin is None:
        raise ValueError("grid does not contain the origin")
    if not above[origin]:
        return ExhaustionRegion(np.zeros(g.shape, bool), False, True, False, "origin not in {G > phi}")
    lab, _ = ndimage.label(above, ndimage.generate_binary_structure(g.n, 1))
    comp = lab == lab[origin]
    bounded = not np.any(comp & g.box_boundary())
    note = "" if bounded else "touches the grid boundary: unbounded at this resolution"
    asserted = bounded if spec.sign > 0 else bool(bounded and exceptional_thin)
    return ExhaustionRegion(comp, True, bounded, asserted, note)


# -- hypersurfaces --------------------------------------------------------


@dataclass(frozen=True)
class PrincipalCurvatures:
    kappa: tuple[float, ...]

    def __post_init__(self):
        k = tuple(float(v) for v in self.kappa)
        if not all(math.isfinite(v) for v in k):
            raise ValueError("curvatures must be finite")
        object.__setattr__(self, "kappa", k)


@dataclass(frozen=True)
class CurvatureClass:
    strictly_convex: bool
    nonnegative_ricci: bool
    nonnegative_sectional: bool


def curvature_condition(k: PrincipalCurvatures | Sequence[float]) -> CurvatureClass:
    """Pointwise convexity conditions for a hypersurface in hyperbolic space."""
    kap = np.asarray(k.kappa if isinstance(k, PrincipalCurvatures) else k, dtype=float)
    n = kap.size
    total = float(kap.sum())
    convex = bool(np.all(kap > 0))
    ricci = bool(np.all(kap * total - kap * kap >= n - 1))
    prod = np.outer(kap, kap)
    off = ~np.eye(n, dtype=bool)
    sectional = bool(np.all(prod[off] >= 1)) if n > 1 else True
    return CurvatureClass(convex, ricci, sectional)


@dataclass(frozen=True, eq=False)
class HypersurfaceGraph:
    rho: object
    n: int

    def sample(self, points):
        return as_function(self.rho)(points)


@dataclass
class RotationProfile:
    radii: np.ndarray
    rho_hat: np.ndarray
    nondecreasing: bool
    log_convex: bool


def inner_rotation(s: HypersurfaceGraph, radii: Sequence[float], resolution: int = 32, tol: float = 1e-9) -> RotationProfile:
    """``rho_hat(r) = sup_{|x| = r} rho`` with monotonicity and convexity-in-log-r checks."""
    radii = np.sort(np.asarray(radii, dtype=float))
    vals = np.array([np.max(s.sample(sphere_nodes(s.n, r, resolution)[0])) for r in radii])
    mono = bool(np.all(np.diff(vals) >= -tol))
    L = np.log(radii)
    if radii.size >= 3:
        slopes = np.diff(vals) / np.diff(L)
        convex = bool(np.all(np.diff(slopes) >= -tol * (1 + np.abs(slopes[1:]))))
    else:
        convex = True
    return RotationProfile(radii, vals, mono, convex)


@dataclass
class EquidistantBound:
    C: float | None
    slope: float
    violation: bool


def equidistant_bound(s: HypersurfaceGraph, radii: Sequence[float], window: int = 8,
                      slope_tol: float = 0.02) -> EquidistantBound:
    """Smallest ``C`` with ``rho_hat(r) <= log r + C`` on the largest radii.

    A fitted slope of ``rho_hat`` against ``log r`` above ``1 + slope_tol``
    certifies that no such constant exists.
    """
    prof = inner_rotation(s, radii)
    r = prof.radii[-window:]
    v = prof.rho_hat[-window:]
    slope = float(np.polyfit(np.log(r), v, 1)[0]) if r.size >= 2 else 1.0
    if slope > 1 + slope_tol:
        return EquidistantBound(None, slope, True)
    return EquidistantBound(float(np.max(v - np.log(r))), slope, False)


@dataclass
class SubharmonicReport:
    violations: np.ndarray
    origin_mass: float | None
    origin_flagged: bool


def busemann_subharmonic_check(rho: ScalarField, tol: float = 1e-6, origin_radius: float | None = None) -> SubharmonicReport:
    """Cells with ``Delta_n rho < -tol`` and the n-Laplacian mass at the origin.

    The origin mass is ``oint |grad rho|^{n-2} d rho/d nu`` on a small
    sphere; a negative value means ``rho`` fails to be n-subharmonic there.
    """
    lap = n_laplacian(rho, 0.0)
    viol = ~lap.singular & (lap.finite_values() < -tol)
    mass = None
    flagged = False
    g = rho.grid
    R = origin_radius or 4 * g.h
    try:
        mass = -flux_through_sphere(rho, R)
        flagged = mass < -max(tol, 1e-3)
    except ValueError:
        mass = None
    return SubharmonicReport(viol, mass, flagged)


@dataclass
class AsymptoteReport:
    m: float
    m1: float
    upper_C: float
    lower_relative: float
    in_range: bool


def hypersurface_asymptote(s: HypersurfaceGraph, R_min: float = 10.0, R_max: float = 1e4, count: int = 16,
                           correction: bool = False) -> AsymptoteReport:
    """``m`` with ``m log|x| + o(log|x|) <= rho <= m log|x| + C`` at infinity.

    The slope comes from ``w(y) = -rho(y/|y|^2) - 2 log|y|`` at the origin:
    its quotient-profile slope ``m1`` gives ``m = 2 - m1``.  With
    ``correction`` the term ``-log(1 + e^{2 rho}/|x|^2)`` is included.
    """
    if math.log10(R_max / R_min) < 3 - 1e-9:
        raise ValueError("need at least 3 decades of exterior radii")
    f = as_function(s.rho)
    n = s.n

    def w(y):
        x = np.asarray(y, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        X = x / r2[..., None]
        val = -np.asarray(f(X), dtype=float) - np.log(r2)
        if correction:
            val = val - np.log1p(np.exp(2 * np.asarray(f(X))) * r2)
        return val

    radii = np.geomspace(1 / R_min, 1 / R_max, count)
    prof = quotient_profile(w, radii, n=n)
    m = slope_after_inversion(prof.m)
    Rs = 1 / radii
    ups, lows = [], []
    for R in Rs:
        v = f(sphere_nodes(n, R, 16)[0])
        ups.append(np.max(v) - m * math.log(R))
        lows.append((np.min(v) - m * math.log(R)) / math.log(R))
    in_range = -0.05 <= m <= 1.05
    return AsymptoteReport(m, prof.m, float(np.max(ups)), float(np.min(lows)), in_range)
