"""The acceptance suite: thirteen end-to-end checks against closed-form oracles.

Each check returns a :class:`CriterionResult`; :func:`run_all` runs them in
order.  Resolutions are fixed module constants so that reports are
reproducible; ``scale`` coarsens every grid for smoke runs (results at
``scale != 1`` are not acceptance results).
"""

from __future__ import annotations

import functools
import inspect
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import asymptotics as asy
from . import capacity as cap
from . import geometry as geo
from . import mt_inequality as mt
from . import thinness as thin
from . import wolff
from .fields import Grid, RadonMeasure, ScalarField, sphere_area
from .nlaplace import DirichletProblem, flux_through_sphere, solve_dirichlet


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.title}: {self.summary} ({self.seconds:.1f}s)"


def _h(h: float, scale: float) -> float:
    return h * scale


@functools.lru_cache(maxsize=4)
def _dirac_solution(n: int, h: float, beta: float = 1.0, boundary: float = 0.0):
    g = Grid.centered(n, 1.0 + 2 * h, h, True)
    mu = RadonMeasure.dirac(np.zeros(n), beta)
    u, rep = solve_dirichlet(DirichletProblem.ball(g, 1.0, mu, boundary))
    return g, mu, u, rep


# 1 ---------------------------------------------------------------------------


def radial_capacity_check(scale: float = 1.0) -> CriterionResult:
    """cap(B(0,1), B(0,e)) for n = 2, 3 with Richardson extrapolation over two grids."""
    grids = {2: (1 / 32, 1 / 64), 3: (1 / 16, 1 / 24)}
    det = {}
    ok = True
    for n, (h1, h2) in grids.items():
        h1, h2 = _h(h1, scale), _h(h2, scale)
        ex = cap.extrapolated_capacity(lambda h, n=n: cap.Condenser.radial(n, 1.0, math.e, h), h1, h2)
        exact = cap.radial_capacity(n, 1.0, math.e)
        err = abs(ex.value - exact) / exact
        det[n] = {"value": ex.value, "exact": exact, "rel_err": err, "raw": [r.value for r in ex.results],
                  "h": [h1, h2]}
        ok &= err <= 0.05
    s = ", ".join(f"n={n}: {d['value']:.4f} vs {d['exact']:.4f} ({100 * d['rel_err']:.2f}%)" for n, d in det.items())
    return CriterionResult(1, "radial capacity oracle", ok, s, det)


# 2 ---------------------------------------------------------------------------


def fundamental_flux_check(scale: float = 1.0) -> CriterionResult:
    """Flux of log(1/|x|) (sampled) and of the solved Dirac problem through three spheres, n = 3."""
    n, h = 3, _h(1 / 48, scale)
    omega = sphere_area(n)
    g = Grid.centered(n, 1.0 + 2 * h, h, True)
    sampled = ScalarField.from_function(g, lambda x: -np.log(np.linalg.norm(x, axis=-1)))
    _, _, solved, _ = _dirac_solution(n, h, omega)
    radii = (0.3, 0.5, 0.7)
    det = {"h": h, "sampled": [], "solved": []}
    ok = True
    for R in radii:
        a = flux_through_sphere(sampled, R) / omega
        b = flux_through_sphere(solved, R) / omega
        det["sampled"].append(a)
        det["solved"].append(b)
        ok &= abs(a - 1) <= 0.01 and abs(b - 1) <= 0.01
    worst = max(abs(v - 1) for v in det["sampled"] + det["solved"])
    return CriterionResult(2, "fundamental-solution flux", ok,
                           f"flux/omega at R={radii}: worst deviation {100 * worst:.3f}%", det)


# 3 ---------------------------------------------------------------------------


def level_set_check(scale: float = 1.0) -> CriterionResult:
    """lam^{n-1} cap({u > lam}) / mu(Omega) for u solved from a unit atom, n = 3, extrapolated."""
    n = 3
    hs = (_h(1 / 32, scale), _h(1 / 48, scale))
    om = sphere_area(n) ** (1 / (n - 1))
    rhos = (0.25, 0.35, 0.45, 0.55, 0.65)
    lams = [math.log(1 / r) / om for r in rhos]
    raw = []
    for h in hs:
        g, mu, u, _ = _dirac_solution(n, h, 1.0)
        dom = g.radius() < 1.0
        raw.append([cap.level_set_capacity_check(u, mu, lam, dom).ratio for lam in lams])
    ext = [cap.richardson(a, hs[0], b, hs[1]) for a, b in zip(*raw)]
    ok = all(0.9 <= r <= 1.05 for r in ext)
    det = {"lambda": lams, "h": list(hs), "raw": raw, "extrapolated": ext}
    return CriterionResult(3, "level-set capacity (sharp case)", ok,
                           "ratios " + ", ".join(f"{r:.4f}" for r in ext) + " (target [0.9, 1.05])", det)


# 4 ---------------------------------------------------------------------------


def wolff_closed_form_check(scale: float = 1.0) -> CriterionResult:
    det = {}
    errs = []
    for n in (2, 3, 4):
        mu = RadonMeasure.dirac(np.zeros(n), 1.0)
        for d in (0.05, 0.1, 0.37):
            x = np.zeros(n)
            x[0] = d
            for r in (0.5, 1.0, 3.0):
                v = wolff.wolff_potential(mu, x, r).value
                errs.append(abs(v - math.log(r / d)))
    det["dirac_max_err"] = max(errs)
    # scaling on a mixed measure
    n = 3
    g = Grid.centered(n, 0.6, 1 / 16)
    dens = ScalarField(g, np.exp(-8 * g.radius() ** 2))
    mu = RadonMeasure(((np.array([0.3, 0.1, 0.0]), 0.4),), dens)
    serr = []
    for c in (0.25, 2.0, 10.0):
        for x in ([0.1, 0.0, 0.05], [0.4, -0.2, 0.1]):
            a = wolff.wolff_potential(mu.scaled(c), x, 1.0).value
            b = c ** (1 / (n - 1)) * wolff.wolff_potential(mu, x, 1.0).value
            serr.append(abs(a - b))
    det["scaling_max_err"] = max(serr)
    ok = det["dirac_max_err"] <= 1e-6 and det["scaling_max_err"] <= 1e-6
    return CriterionResult(4, "Wolff closed forms", ok,
                           f"Dirac err {det['dirac_max_err']:.2e}, scaling err {det['scaling_max_err']:.2e}", det)


# 5 ---------------------------------------------------------------------------


def cutoff_check(scale: float = 1.0) -> CriterionResult:
    worst = 0.0
    for n in (2, 3, 4):
        for alpha in (0.3, 1.0, 2.5):
            spec = asy.CutoffSpec(alpha, n)
            s = np.linspace(0, alpha, 50)
            v, d = asy.cutoff_a(s, spec)
            worst = max(worst, float(np.max(np.abs(v - s))), float(np.max(np.abs(d - 1))))
            big = np.geomspace(alpha * 1.0001, alpha * 1e8, 200)
            v, d = asy.cutoff_a(big, spec)
            worst = max(worst, float(max(0.0, np.max(v - n * alpha))), float(max(0.0, -np.min(v))))
            # closed-form derivative (alpha/s)^{n/(n-1)}
            worst = max(worst, float(np.max(np.abs(d - (alpha / big) ** (n / (n - 1))))))
            lim, _ = asy.cutoff_a(alpha * 1e40, spec)
            worst = max(worst, abs(lim - n * alpha))
            # C^1 at the knot
            vl, dl = asy.cutoff_a(alpha, spec)
            vr, dr = asy.cutoff_a(alpha * (1 + 1e-15), spec)
            worst = max(worst, abs(vl - alpha), abs(dl - 1), abs(vr - vl), abs(dr - dl))
    ok = worst <= 1e-12
    return CriterionResult(5, "cutoff calculus", ok, f"max deviation {worst:.2e}", {"max_dev": worst})


# 6 ---------------------------------------------------------------------------


def synthetic_fields():
    """Ten fields m log(1/|x|) + bounded perturbation, for m in {0, 0.3, 0.5, 1, 1.5}."""
    fields = []
    for m in (0.0, 0.3, 0.5, 1.0, 1.5):
        def f1(x, m=m):
            r = np.linalg.norm(x, axis=-1)
            return m * np.log(1 / r) + 0.5 * np.sin(5 * r) + 0.3 * x[..., 0] / r

        def f2(x, m=m):
            r = np.linalg.norm(x, axis=-1)
            return m * np.log(1 / r) + 1.0 + np.cos(3 * np.log(r)) * 0.4

        fields.append((m, "ripple", f1))
        fields.append((m, "log-oscillation", f2))
    return fields


def slope_recovery_check(scale: float = 1.0) -> CriterionResult:
    radii = np.geomspace(1e-1, 1e-5, 20)
    rows = []
    ok = True
    for m, kind, f in synthetic_fields():
        est = asy.quotient_profile(f, radii, n=3).m
        rows.append((m, kind, est))
        ok &= abs(est - m) <= 0.05
    worst = max(abs(e - m) for m, _, e in rows)
    return CriterionResult(6, "slope recovery", ok, f"10 fields, worst |m_est - m| = {worst:.4f}", {"rows": rows})


# 7 ---------------------------------------------------------------------------


def _monotone_problems(scale: float):
    out = []
    h2 = _h(1 / 128, scale)
    g2 = Grid.centered(2, 1.0 + 2 * h2, h2, True)
    w2 = 2 * math.pi
    for beta, c in ((w2, 0.1), (2 * w2, 0.1), (w2, 0.5), (0.5 * w2, 0.2)):
        out.append(("n=2 atom beta=%.3g bd=%.2g" % (beta, c), g2, RadonMeasure.dirac([0, 0], beta), c))
    dens2 = ScalarField(g2, 3.0 * (g2.radius() < 0.5))
    out.append(("n=2 atom+density", g2, RadonMeasure(((np.zeros(2), w2),), dens2), 0.1))
    out.append(("n=2 off-center atoms", g2, RadonMeasure(((np.zeros(2), w2), (np.array([0.4, 0.0]), 2.0))), 0.1))
    h3 = _h(1 / 32, scale)
    g3 = Grid.centered(3, 1.0 + 2 * h3, h3, True)
    w3 = sphere_area(3)
    out.append(("n=3 atom beta=omega", g3, RadonMeasure.dirac([0, 0, 0], w3), 0.1))
    out.append(("n=3 atom beta=2omega", g3, RadonMeasure.dirac([0, 0, 0], 2 * w3), 0.1))
    out.append(("n=3 atom bd=0.5", g3, RadonMeasure.dirac([0, 0, 0], w3), 0.5))
    dens3 = ScalarField(g3, 5.0 * (g3.radius() < 0.4))
    out.append(("n=3 atom+density", g3, RadonMeasure(((np.zeros(3), w3),), dens3), 0.1))
    return out


def monotone_minimum_check(scale: float = 1.0, tol: float = 1e-3) -> CriterionResult:
    rows = []
    ok = True
    for name, g, mu, c in _monotone_problems(scale):
        u, rep = solve_dirichlet(DirichletProblem.ball(g, 1.0, mu, c))
        radii = np.geomspace(0.8, 6 * g.h, 14)
        prof = asy.quotient_profile(lambda p, u=u: u.sample(p, order=3), radii, n=g.n)
        q = prof.minimum[np.argsort(prof.radii)[::-1]]
        worst = float(np.max(np.diff(q)))
        good = prof.is_monotone(tol) and rep.converged
        rows.append({"problem": name, "max_increase": worst, "converged": rep.converged, "m": prof.m})
        ok &= good
    worst = max(r["max_increase"] for r in rows)
    return CriterionResult(7, "monotone sphere minimum", ok,
                           f"{len(rows)} solved problems, largest increase of the sphere-minimum quotient as r decreases = {worst:+.2e} (allowed <= {tol:g})",
                           {"rows": rows})


# 8 ---------------------------------------------------------------------------


def thinness_check(scale: float = 1.0) -> CriterionResult:
    n = 3
    h = _h(1 / 16, scale)
    bounded = thin.PointSet(n, lambda x: np.linalg.norm(x, axis=-1) <= 3.0, (), None, (True,) * n)
    cases = [("ball chain at 0", thin.ball_chain(n, 1, 14), thin.Verdict.THIN),
             ("solid annuli at 0", thin.solid_annuli(n), thin.Verdict.NOT_THIN),
             ("bounded set at infinity", bounded, thin.Verdict.THIN)]
    det = {}
    ok = True
    for name, E, expect in cases:
        a = thin.thinness_series(E, 1, 12, h)
        b = thin.thinness_series(E.inverted(), 1, 12, h)
        det[name] = {"verdict": a.verdict.value, "inverted": b.verdict.value, "slope": a.slope,
                     "slope_inverted": b.slope, "capacities": a.capacities.tolist()}
        ok &= a.verdict == expect and b.verdict == expect
    s = "; ".join(f"{k}: {v['verdict']}/{v['inverted']}" for k, v in det.items())
    return CriterionResult(8, "thinness verdicts + inversion duality", ok, s, det)


# 9 ---------------------------------------------------------------------------


def du_bois_reymond_check(scale: float = 1.0, seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    ok = True
    worst = 0.0
    for k in range(100):
        length = int(rng.integers(5, 200))
        p = rng.uniform(1.1, 4.0)
        seq = rng.uniform(0, 1, length) * np.arange(1, length + 1) ** -p
        if k % 5 == 0:
            seq[rng.random(length) < 0.3] = 0.0
        ws = wolff.du_bois_reymond_weights(seq)
        z = ws.weights
        decay = bool(np.all(np.diff(z) <= 0)) and z[-1] <= z[0]
        ratio = ws.weighted_sum / ws.bound
        worst = max(worst, ratio)
        ok &= decay and ratio <= 1 + 1e-12 and np.all(z > 0)
    return CriterionResult(9, "du Bois-Reymond weights", ok,
                           f"100 sequences, max sum/bound = {worst:.4f}", {"max_ratio": worst})


# 10 --------------------------------------------------------------------------


def exponential_integral_check(scale: float = 1.0, n: int = 2, diagnostic_n3: bool = True) -> CriterionResult:
    deltas = np.linspace(0.1, 0.9, 9)
    h = _h(1 / 64, scale)
    g, dom, fam = mt.standard_family(n, h, radius=0.2)
    probs = {k: mt.BMProblem(f, dom) for k, f in fam.items()}
    rep = mt.bm_sweep(probs, deltas)
    p = probs["bump"]
    wn = mt.normalized_potential(p)
    p2 = mt.BMProblem(ScalarField(g, 2 * p.f.values), dom)
    wn2 = mt.normalized_potential(p2)
    inv = max(abs(mt.lhs_from_potential(wn, p, d) - mt.lhs_from_potential(wn2, p2, d))
              / mt.lhs_from_potential(wn, p, d) for d in deltas)
    ok = rep.all_finite and rep.envelope_ratio < 50 and inv <= 1e-6
    det = {"n": n, "h": h, "envelope": rep.envelope.tolist(), "envelope_ratio": rep.envelope_ratio,
           "normalization_rel_err": inv, "fitted_c": rep.fitted_c, "monotone": rep.monotone}
    summary = (f"n={n}: finite={rep.all_finite}, envelope max/min={rep.envelope_ratio:.2f} (<50), "
               f"f->2f rel err {inv:.1e}, fitted c(n)={rep.fitted_c:.2e}")
    if diagnostic_n3:
        h3 = _h(1 / 20, scale)
        g3, dom3, fam3 = mt.standard_family(3, h3, radius=0.2)
        r3 = mt.bm_sweep({k: mt.BMProblem(f, dom3) for k, f in fam3.items()}, deltas)
        det["n3_envelope_ratio"] = r3.envelope_ratio
        det["n3_finite"] = r3.all_finite
        summary += f"; n=3 diagnostic envelope max/min={r3.envelope_ratio:.1f}"
    return CriterionResult(10, "exponential integral harness", ok, summary, det)


# 11 --------------------------------------------------------------------------


def km_check(scale: float = 1.0) -> CriterionResult:
    n = 3
    h = _h(1 / 48, scale)
    omega = sphere_area(n)
    _, mu, u, _ = _dirac_solution(n, h, omega)
    direction = np.ones(n) / math.sqrt(n)
    bases = np.geomspace(0.04, 0.12, 10)
    members: list[tuple[str, object, RadonMeasure]] = [("solved", u, mu)]
    for m in (0.5, 2.0):
        members.append((f"closed m={m}", lambda x, m=m: m * np.log(1 / np.linalg.norm(x, axis=-1)),
                        RadonMeasure.dirac(np.zeros(n), m ** (n - 1) * omega)))
    ratios = {}
    for name, w, meas in members:
        ratios[name] = [wolff.km_sandwich(w, meas, s * direction, 2 * s).lower_ratio for s in bases]
    allr = np.concatenate([np.asarray(v) for v in ratios.values()])
    lo, hi = float(allr.min()), float(allr.max())
    ok = bool(np.all(np.isfinite(allr))) and lo >= wolff.KM_LOWER_CONSTANT and hi / lo < 3
    return CriterionResult(11, "two-sided Wolff estimate (lower side)", ok,
                           f"w/W over 10 points x {len(members)} fields in [{lo:.3f}, {hi:.3f}], "
                           f"spread {hi / lo:.2f} (<3), floor {wolff.KM_LOWER_CONSTANT}",
                           {"ratios": ratios, "bases": bases.tolist()})


# 12 --------------------------------------------------------------------------


def geometry_check(scale: float = 1.0) -> CriterionResult:
    det = {}
    ok = True
    n = 3
    g = Grid.centered(n, 4.0, _h(1 / 8, scale))
    diffs = []
    for m in (0.25, 0.5, 0.75):
        phi = geo.capped_log_profile(m, 0.1)
        fm = geo.flux_m(geo.ConformalMetric(ScalarField.from_function(g, phi), n), [1.5, 2.0, 2.5, 3.0]).m
        pm = geo.profile_m(geo.ConformalMetric(phi, n))
        diffs.append((m, fm, pm))
        ok &= abs(fm - pm) < 0.05
    det["flux_vs_profile"] = diffs
    c = 1 / math.tanh(1)
    table = {
        (1.0, 1.0, 1.0): (True, True, True),
        (0.0, 0.0, 0.0): (False, False, False),
        (c, c, c): (True, True, True),
        (2.0, 0.6, 0.6): (True, False, False),
        (0.4, 1.5, 10.0): (True, True, False),
        (0.5, 0.5, 0.5): (True, False, False),
        (3.0, -0.1, 1.0): (False, False, False),
    }
    table_ok = True
    for k, want in table.items():
        got = geo.curvature_condition(k)
        table_ok &= (got.strictly_convex, got.nonnegative_ricci, got.nonnegative_sectional) == want
    for dim in (2, 3, 4):
        ones = geo.curvature_condition((1.0,) * dim)
        table_ok &= ones.nonnegative_ricci and ones.nonnegative_sectional
    det["curvature_table"] = table_ok
    ok &= table_ok
    eq = geo.HypersurfaceGraph(lambda x: np.log(np.linalg.norm(x, axis=-1)), n)
    eb = geo.equidistant_bound(eq, np.geomspace(1, 1e3, 12))
    det["equidistant_C"] = eb.C
    ok &= eb.C is not None and abs(eb.C) <= 1e-12
    m_eq = geo.hypersurface_asymptote(eq).m
    m_h = geo.hypersurface_asymptote(geo.HypersurfaceGraph(lambda x: np.full(x.shape[:-1], 0.3), n)).m
    det["m_equidistant"] = m_eq
    det["m_horosphere"] = m_h
    ok &= abs(m_eq - 1) <= 1e-6 and abs(m_h) <= 1e-6
    worst = max(abs(f - p) for _, f, p in diffs)
    return CriterionResult(12, "geometry", ok,
                           f"|flux_m - profile_m| <= {worst:.2e}, curvature table {'exact' if table_ok else 'WRONG'}, "
                           f"C={eb.C:.1e}, m(equidistant)={m_eq:.6f}, m(horosphere)={m_h:.1e}", det)


# 13 --------------------------------------------------------------------------


def gehring_check(scale: float = 1.0) -> CriterionResult:
    rows = cap.gehring_probe([1.0, 0.5, 0.25], n=3, h=_h(1 / 16, scale))
    prods = [r.product for r in rows]
    ok = all(p is not None and p > 0 for p in prods)
    ratio = max(prods) / min(prods) if ok else math.inf
    ok &= ratio < 10
    return CriterionResult(13, "Gehring probe", ok,
                           "products " + ", ".join(f"L={r.L:g}: {r.product:.3f}" for r in rows)
                           + f", max/min {ratio:.2f} (<10)", {"rows": [r.__dict__ for r in rows]})


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: radial_capacity_check,
    2: fundamental_flux_check,
    3: level_set_check,
    4: wolff_closed_form_check,
    5: cutoff_check,
    6: slope_recovery_check,
    7: monotone_minimum_check,
    8: thinness_check,
    9: du_bois_reymond_check,
    10: exponential_integral_check,
    11: km_check,
    12: geometry_check,
    13: gehring_check,
}


def run_criterion(k: int, scale: float = 1.0, seed: int = 0) -> CriterionResult:
    fn = CRITERIA[k]
    kw = {"seed": seed} if "seed" in inspect.signature(fn).parameters else {}
    t = time.perf_counter()
    try:
        res = fn(scale=scale, **kw)
    except Exception as exc:  # a crash is a failed criterion, not a crashed suite
        res = CriterionResult(k, CRITERIA[k].__name__, False, f"error: {type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t
    return res


def run_all(scale: float = 1.0, only=None, echo: Callable[[str], None] | None = None,
            seed: int = 0) -> list[CriterionResult]:
    out = []
    for k in sorted(CRITERIA):
        if only and k not in only:
            continue
        r = run_criterion(k, scale, seed)
        if echo:
            echo(r.line())
        out.append(r)
    return out
