"""Wolff potentials W(x, r) = int_0^r mu(B(x,t))^{1/(n-1)} dt/t and related checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.signal import fftconvolve

from .fields import BallMassProfile, RadonMeasure, ScalarField, ball_volume

DEFAULT_NODES = 512
# smallest ratio w(x0)/W(x0, r) seen on the radial calibration family, halved
KM_LOWER_CONSTANT = 0.5


@dataclass(frozen=True)
class WolffEvaluation:
    x: tuple[float, ...]
    r: float
    value: float
    nodes: int
    error: float
    infinite: bool = False


def _gauss_log(a: float, b: float, k: int = 4):
    """Gauss-Legendre nodes in ``s = log t`` on ``[a, b]``; weights include dt/t."""
    s, w = leggauss(k)
    la, lb = math.log(a), math.log(b)
    ls = 0.5 * (lb - la) * s + 0.5 * (lb + la)
    return np.exp(ls), 0.5 * (lb - la) * w


def _panel_quadrature(edges: np.ndarray, k: int = 4):
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            t, w = _gauss_log(a, b, k)
            ts.append(t)
            ws.append(w)
    if not ts:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(ts), np.concatenate(ws)


def _power_head(c: float, a: float, n: int) -> float:
    """``int_0^a (c t^n)^{1/(n-1)} dt/t``."""
    if c <= 0 or a <= 0:
        return 0.0
    return c ** (1 / (n - 1)) * a ** (n / (n - 1)) * (n - 1) / n


def wolff_integral(mass: Callable[[np.ndarray], np.ndarray], r: float, n: int,
                   nodes: int = DEFAULT_NODES, t_min: float | None = None, breaks: Sequence[float] = ()) -> float:
    """Wolff integral for an explicit ball-mass function ``t -> mu(B(x,t))``.

    Log-spaced Gauss-Legendre panels on ``[t_min, r]``, split at ``breaks``
    (radii where the mass function is not smooth); below ``t_min`` the
    mass is extrapolated as ``c t^n``.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    t_min = r * 1e-12 if t_min is None else t_min
    edges = np.geomspace(t_min, r, nodes)
    inner = [b for b in breaks if t_min < b < r]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
    t, w = _panel_quadrature(edges)
    vals = np.maximum(np.asarray(mass(t), dtype=float), 0.0) ** (1 / (n - 1))
    m0 = float(np.asarray(mass(np.array([t_min])))[0])
    return float(np.sum(w * vals)) + _power_head(m0 / t_min**n, t_min, n)


def _profile_integral(profile: BallMassProfile, r: float, n: int, nodes: int) -> float:
    """Exact on intervals where the ball mass is constant, Gauss panels where
    the host cell is still filling up (mass ``S + c t^n``)."""
    t_cell = math.inf
    c = 0.0
    if profile.host_mass:
        t_cell = (profile.cell_volume / ball_volume(n, 1.0)) ** (1 / n)
        c = profile.host_mass / profile.cell_volume * ball_volume(n, 1.0)
    bps = profile.breakpoints()
    edges = np.unique(np.concatenate([bps[(bps > 0) & (bps < r)], [t_cell] if t_cell < r else [], [r]]))
    total = _power_head(c, edges[0], n)
    sub = max(2, nodes // 64)
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= t_cell:
            t, w = _panel_quadrature(np.geomspace(a, b, sub + 1), 8)
            total += float(np.sum(w * profile(t) ** (1 / (n - 1))))
        else:
            total += math.log(b / a) * float(profile(math.sqrt(a * b))) ** (1 / (n - 1))
    return total


def wolff_potential(mu: RadonMeasure, x: Sequence[float], r: float, nodes: int = DEFAULT_NODES) -> WolffEvaluation:
    """W^mu_{1,n}(x, r); an atom sitting at ``x`` makes the value infinite."""
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    n = x.size
    prof = BallMassProfile(mu, x)
    key = tuple(float(v) for v in x)
    if prof.atoms_at_center(1e-14) > 0:
        return WolffEvaluation(key, r, math.inf, nodes, 0.0, True)
    v = _profile_integral(prof, r, n, nodes)
    coarse = _profile_integral(prof, r, n, max(8, nodes // 2))
    return WolffEvaluation(key, r, v, nodes, abs(v - coarse))


def wolff_field(mu: RadonMeasure, r: float, nodes: int = 64, exact_cells: int = 6) -> ScalarField:
    """W(x, r) at every cell of the density grid of ``mu`` (atoms not allowed).

    Ball masses for all centers at once come from FFT convolutions with
    ball indicators.  Below ``exact_cells * h`` the integrand jumps at the
    lattice distances, which are integrated exactly; above, log-spaced
    Gauss panels are used.  Matches :func:`wolff_potential` up to the
    quadrature error of the upper range.
    """
    if mu.atoms:
        raise ValueError("gridded Wolff potentials need a pure density")
    if mu.density is None:
        raise ValueError("measure has no density")
    dens = mu.density
    g = dens.grid
    if any(g.mirror):
        raise ValueError("gridded Wolff potentials need an unmirrored grid")
    n, h = g.n, g.h
    cell_mass = dens.values * h**n
    t_cell = (h**n / ball_volume(n, 1.0)) ** (1 / n)
    reach = min(r, float(np.linalg.norm(np.asarray(g.shape) - 1) * h) + h)

    def mass_at(t: float) -> np.ndarray:
        k = int(math.floor(t / h + 1e-9))
        ax = np.arange(-k, k + 1)
        d2 = sum(np.meshgrid(*([ax * ax] * n), indexing="ij"))
        ker = (d2 * h * h <= t * t * (1 + 1e-12)).astype(float)
        ker[(k,) * n] = 0.0
        out = fftconvolve(cell_mass, ker, mode="same") if k > 0 else np.zeros_like(cell_mass)
        out = np.maximum(out, 0.0)
        return out + cell_mass * min(1.0, ball_volume(n, t) / h**n)

    top = max(min(exact_cells * h, reach), min(t_cell, reach))
    k = int(math.ceil(top / h)) + 1
    ax = np.arange(-k, k + 1)
    sq = np.unique(sum(np.meshgrid(*([ax * ax] * n), indexing="ij")).ravel())
    dists = np.sqrt(sq[sq > 0]) * h
    edges = np.unique(np.concatenate([dists[dists < top], [t_cell] if t_cell < top else [], [top]]))
    c = dens.values * ball_volume(n, 1.0)
    e0 = edges[0]
    total = c ** (1 / (n - 1)) * e0 ** (n / (n - 1)) * (n - 1) / n
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= t_cell:
            t, w = _gauss_log(a, b, 8)
            for ti, wi in zip(t, w):
                total += wi * mass_at(ti) ** (1 / (n - 1))
        else:
            total += math.log(b / a) * mass_at(math.sqrt(a * b)) ** (1 / (n - 1))
    if reach > top:
        t, w = _panel_quadrature(np.geomspace(top, reach, nodes + 1), 2)
        for ti, wi in zip(t, w):
            total += wi * mass_at(ti) ** (1 / (n - 1))
    if r > reach:
        total += math.log(r / reach) * mu.total_mass() ** (1 / (n - 1))
    return ScalarField(g, total)


@dataclass(frozen=True)
class KMReport:
    """Observables of the two-sided Wolff estimate at one point."""

    x: tuple[float, ...]
    r: float
    w_x0: float
    wolff_r: float
    wolff_2r: float
    inf_ball: float
    lower_ratio: float
    harnack_ratio: float

    @property
    def lower_ok(self) -> bool:
        return self.lower_ratio >= KM_LOWER_CONSTANT


def km_sandwich(w, mu: RadonMeasure, x0: Sequence[float], r: float, nodes: int = DEFAULT_NODES) -> KMReport:
    """Evaluate ``w(x0)/W(x0,r)``, ``inf_{B(x0,r)} w`` and ``W(x0,2r)``.

    ``w`` is a ScalarField (requires ``B(x0, 3r)`` inside its grid) or a
    callable.  The ratio ``w(x0) / (inf + W(x0, 2r))`` monitors the upper
    bound, which reduces to a Harnack ratio when ``mu = 0``.
    """
    x0 = np.asarray(x0, dtype=float)
    if isinstance(w, ScalarField):
        g = w.grid
        n = g.n
        probe = x0 + 3 * r * np.vstack([np.eye(n), -np.eye(n)])
        if not np.all(g.contains(probe)):
            raise ValueError("B(x0, 3r) must lie inside the grid")
        w0 = float(w.sample(x0[None])[0])
        ball = (g.radius(x0) <= r) & ~w.singular
        inf_ball = float(w.values[ball].min()) if ball.any() else w0
    else:
        n = x0.size
        w0 = float(w(x0[None])[0])
        dirs = np.vstack([np.eye(n), -np.eye(n)])
        pts = [x0[None]] + [x0 + s * r * dirs for s in (0.25, 0.5, 0.75, 1.0)]
        inf_ball = float(np.nanmin(w(np.vstack(pts))))
    W1 = wolff_potential(mu, x0, r, nodes).value
    W2 = wolff_potential(mu, x0, 2 * r, nodes).value
    lower = math.inf if W1 == 0 else w0 / W1
    den = inf_ball + W2
    harnack = math.inf if den <= 0 else w0 / den
    return KMReport(tuple(x0.tolist()), r, w0, W1, W2, inf_ball, lower, harnack)


@dataclass(frozen=True)
class WeightSequence:
    masses: np.ndarray
    weights: np.ndarray

    @property
    def weighted_sum(self) -> float:
        return float(np.sum(self.masses[: self.weights.size] / self.weights))

    @property
    def bound(self) -> float:
        return 2.0 * math.sqrt(float(np.sum(self.masses)))


def du_bois_reymond_weights(masses) -> WeightSequence:
    """Weights ``zeta_i = sqrt(sum_{j>=i} mu_j)`` tending to zero while keeping
    ``sum mu_i / zeta_i <= 2 sqrt(sum mu_i)``.  Truncated after the last positive entry."""
    mu = np.asarray(masses, dtype=float)
    if np.any(mu < 0) or not np.all(np.isfinite(mu)):
        raise ValueError("masses must be finite and nonnegative")
    pos = np.flatnonzero(mu > 0)
    if pos.size == 0:
        return WeightSequence(mu, np.zeros(0))
    mu_t = mu[: pos[-1] + 1]
    tails = np.cumsum(mu_t[::-1])[::-1]
    return WeightSequence(mu, np.sqrt(tails))


def potential_quotient_decay(mu: RadonMeasure, path, nodes: int = DEFAULT_NODES) -> np.ndarray:
    """``W(y, |y|/2) / log(1/|y|)`` along points approaching the origin."""
    out = []
    for y in np.atleast_2d(np.asarray(path, dtype=float)):
        ry = float(np.linalg.norm(y))
        ev = wolff_potential(mu, y, ry / 2, nodes)
        out.append(ev.value / math.log(1 / ry))
    return np.array(out)
