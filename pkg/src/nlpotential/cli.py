"""Command line scenario runner.

    nlpotential <subcommand> [--config FILE] [--out DIR] [--grid-h H] [--epsilon EPS]
                             [--seed N] [--threads N]

The config is TOML (or JSON) with one table per subcommand; every key is
optional and validated against the schema below.  Reports are JSON with
sorted keys and data series are CSV, so a fixed (scenario, seed) gives
identical bytes.  Exit status: 0 success, 1 failed acceptance or failed
item, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import acceptance as acc
from . import asymptotics as asy
from . import capacity as cap
from . import geometry as geo
from . import io
from . import mt_inequality as mt
from . import thinness as thin
from . import wolff
from .fields import Grid, RadonMeasure, ScalarField, sphere_area
from .nlaplace import DirichletProblem, flux_through_sphere, solve_dirichlet

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SUBCOMMANDS = ("solve", "capacity", "wolff", "thinness", "blowdown", "bm", "geometry", "acceptance")

NUM = (int, float)
LIST = (list,)

# key -> (accepted types, default); None defaults are resolved per run
SCHEMA: dict[str, dict[str, tuple[tuple, object]]] = {
    "solve": {
        "n": ((int,), 3), "radius": (NUM, 1.0), "boundary": (NUM, 0.0), "beta": (NUM, None),
        "atoms": (LIST, []), "density": (NUM, 0.0), "density_radius": (NUM, 0.5),
        "h": (NUM, None), "epsilon": (NUM, None), "max_iter": ((int,), 200),
        "rel_energy_tol": (NUM, 1e-10), "residual_tol": (NUM, 1e-8),
        "flux_radii": (LIST, [0.3, 0.5, 0.7]), "profile_count": ((int,), 14), "save_field": ((bool,), True),
    },
    "capacity": {
        "oracle": ((str,), "radial"), "n": (LIST, [2, 3]), "rho": (NUM, 1.0), "R": (NUM, math.e),
        "h": (NUM, None), "epsilon_factor": (NUM, 1.0), "tolerance": (NUM, 0.05),
    },
    "wolff": {
        "n": ((int,), 3), "atoms": (LIST, None), "points": (LIST, None), "r": (NUM, 1.0),
        "nodes": ((int,), wolff.DEFAULT_NODES),
    },
    "thinness": {
        "set": ((str,), "chain"), "n": ((int,), 3), "i_min": ((int,), 1), "i_max": ((int,), 12),
        "invert": ((bool,), False), "rays": ((int,), 2000), "h": (NUM, 1 / 16), "epsilon": (NUM, None),
        "window": ((int,), 8),
    },
    "blowdown": {
        "field": ((str,), "synthetic"), "n": ((int,), 3), "m": (NUM, 1.0), "amplitude": (NUM, 0.5),
        "beta": (NUM, None), "boundary": (NUM, 0.1), "h": (NUM, None), "epsilon": (NUM, None),
        "r_max": (NUM, 0.1), "r_min": (NUM, 1e-5), "count": ((int,), 20), "tolerance": (NUM, 1e-3),
    },
    "bm": {
        "n": ((int,), 2), "radius": (NUM, 0.2), "h": (NUM, None), "deltas": (LIST, None),
        "nodes": ((int,), 64), "ratio_bound": (NUM, 50.0),
    },
    "geometry": {
        "mode": ((str,), "conformal"), "n": ((int,), 3), "m": (LIST, [0.25, 0.5, 0.75]),
        "delta": (NUM, 0.1), "h": (NUM, 1 / 8), "half_width": (NUM, 4.0), "radii": (LIST, [1.5, 2.0, 2.5, 3.0]),
        "profile": ((str,), "equidistant"), "slope": (NUM, 1.0), "offset": (NUM, 0.0),
        "curvatures": (LIST, []),
    },
    "acceptance": {
        "only": (LIST, []), "scale": (NUM, 1.0),
    },
}

CHOICES = {
    ("capacity", "oracle"): ("radial", "none"),
    ("thinness", "set"): ("chain", "annuli", "bounded"),
    ("blowdown", "field"): ("synthetic", "solved"),
    ("geometry", "mode"): ("conformal", "hypersurface", "curvature"),
    ("geometry", "profile"): ("equidistant", "horosphere", "perturbed"),
}


class ConfigError(Exception):
    pass


@dataclass
class Scenario:
    subcommand: str
    params: dict
    out: Path
    seed: int = 0
    threads: int = 1
    config_path: Path | None = None


def _key_line(text: str, key: str) -> int | None:
    pat = re.compile(rf'^\s*"?{re.escape(key)}"?\s*[=:]', re.M)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(path, text, key) -> str:
    line = _key_line(text, key) if text else None
    return f"{path}:{line}" if line else f"{path}"


def load_config(path: Path | None, subcommand: str) -> dict:
    """Parse and validate the table for ``subcommand``; raises ConfigError with a located message."""
    schema = SCHEMA[subcommand]
    params = {k: v[1] for k, v in schema.items()}
    if path is None:
        return params
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        data = json.loads(text) if Path(path).suffix == ".json" else tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: malformed JSON: {exc.msg}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed TOML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table")
    for sec in data:
        if sec not in SCHEMA:
            raise ConfigError(f"{_where(path, text, sec)}: unknown section '{sec}'")
        if not isinstance(data[sec], dict):
            raise ConfigError(f"{_where(path, text, sec)}: section '{sec}' must be a table")
    for key, value in data.get(subcommand, {}).items():
        loc = _where(path, text, key)
        if key not in schema:
            raise ConfigError(f"{loc}: [{subcommand}] unknown key '{key}'")
        types = schema[key][0]
        ok = isinstance(value, types) and not (isinstance(value, bool) and bool not in types)
        if not ok:
            names = "/".join(t.__name__ for t in types)
            raise ConfigError(f"{loc}: [{subcommand}] key '{key}' must be {names}, got {type(value).__name__}")
        if (subcommand, key) in CHOICES and value not in CHOICES[(subcommand, key)]:
            raise ConfigError(f"{loc}: [{subcommand}] key '{key}' must be one of {CHOICES[(subcommand, key)]}")
        if isinstance(value, (int, float)) and not isinstance(value, bool) and not math.isfinite(value):
            raise ConfigError(f"{loc}: [{subcommand}] key '{key}' must be finite")
        params[key] = value
    return params


def _positive(params, key, sub):
    v = params.get(key)
    if v is not None and v <= 0:
        raise ConfigError(f"[{sub}] key '{key}' must be positive")


def _atoms(raw, n: int, sub: str) -> tuple:
    atoms = []
    for a in raw:
        if not isinstance(a, list) or len(a) != n + 1 or not all(isinstance(v, NUM) for v in a):
            raise ConfigError(f"[{sub}] key 'atoms': each atom is [x1..x{n}, mass]")
        if a[-1] < 0:
            raise ConfigError(f"[{sub}] key 'atoms': masses must be nonnegative")
        atoms.append((np.asarray(a[:-1], float), float(a[-1])))
    return tuple(atoms)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, items))


# -- subcommands ----------------------------------------------------------


def run_solve(s: Scenario) -> int:
    p = s.params
    n = p["n"]
    for k in ("radius", "h", "epsilon", "rel_energy_tol", "residual_tol"):
        _positive(p, k, "solve")
    h = p["h"] or (1 / 64 if n == 2 else 1 / 32)
    eps = p["epsilon"] or h
    beta = sphere_area(n) if p["beta"] is None else float(p["beta"])
    extra = _atoms(p["atoms"], n, "solve")
    atoms = ((np.zeros(n), beta),) + extra if beta > 0 else extra
    mirror = not extra
    R = float(p["radius"])
    g = Grid.centered(n, R + 2 * h, h, mirror)
    dens = None
    if p["density"]:
        dens = ScalarField(g, float(p["density"]) * (g.radius() < p["density_radius"]))
    mu = RadonMeasure(atoms, dens)
    prob = DirichletProblem.ball(g, R, mu, float(p["boundary"]), eps)
    u, rep = solve_dirichlet(prob, max_iter=p["max_iter"], rel_energy_tol=p["rel_energy_tol"],
                             residual_tol=p["residual_tol"])
    flux = []
    for r in p["flux_radii"]:
        if 0 < r < R:
            flux.append([float(r), flux_through_sphere(u, r)])
    radii = np.geomspace(0.8 * R, max(6 * h, 0.01 * R), p["profile_count"])
    prof = asy.quotient_profile(lambda x: u.sample(x, order=3), radii, n=n)
    s.out.mkdir(parents=True, exist_ok=True)
    io.write_csv(prof.rows(), ["radius", "min_quotient", "median_quotient", "max_quotient"], s.out / "profile.csv")
    io.write_csv(flux, ["radius", "flux"], s.out / "flux.csv")
    if p["save_field"]:
        io.write_field(u, s.out / "u.nlpf")
    io.write_json({"h": h, "epsilon": eps, "tolerances": {"rel_energy_tol": p["rel_energy_tol"],
                   "residual_tol": p["residual_tol"], "max_iter": p["max_iter"]},
                   "n": n, "mass": mu.total_mass(), "report": rep, "flux": flux,
                   "flux_closed_form": mu.total_mass(), "slope_m": prof.m, "monotone_min": prof.is_monotone()},
                  s.out / "solve.json")
    print(f"solve: n={n} h={h:g} eps={eps:g} converged={rep.converged} iterations={rep.iterations}")
    return 0 if rep.converged else 1


def run_capacity(s: Scenario) -> int:
    p = s.params
    _positive(p, "h", "capacity")
    _positive(p, "rho", "capacity")
    if not p["R"] > p["rho"]:
        raise ConfigError("[capacity] key 'R' must exceed 'rho'")
    for n in p["n"]:
        if not isinstance(n, int) or n < 2:
            raise ConfigError("[capacity] key 'n': dimensions must be integers >= 2")
    default_h = {2: (1 / 32, 1 / 64), 3: (1 / 16, 1 / 24)}

    def row(n):
        h1, h2 = (p["h"], p["h"] * 2 / 3) if p["h"] else default_h.get(n, (1 / 12, 1 / 16))
        try:
            ex = cap.extrapolated_capacity(lambda h: cap.Condenser.radial(n, p["rho"], p["R"], h), h1, h2,
                                           p["epsilon_factor"])
        except Exception as exc:
            return [n, h1, h2, "", "", "", "", "", False, f"error: {exc}"]
        conv = all(r.converged for r in ex.results)
        exact = cap.radial_capacity(n, p["rho"], p["R"]) if p["oracle"] == "radial" else float("nan")
        err = abs(ex.value - exact) / exact if p["oracle"] == "radial" else float("nan")
        ok = conv and (p["oracle"] != "radial" or err <= p["tolerance"])
        return [n, h1, h2, ex.results[0].value, ex.results[1].value, ex.value, exact, err, ok,
                "" if conv else "not converged"]

    rows = _map(row, p["n"], s.threads)
    header = ["n", "h1", "h2", "cap_h1", "cap_h2", "extrapolated", "closed_form", "rel_err", "ok", "note"]
    s.out.mkdir(parents=True, exist_ok=True)
    io.write_csv(rows, header, s.out / "capacity.csv")
    io.write_json({"rows": [dict(zip(header, r)) for r in rows], "epsilon_factor": p["epsilon_factor"],
                   "tolerance": p["tolerance"], "rho": p["rho"], "R": p["R"], "oracle": p["oracle"]},
                  s.out / "capacity.json")
    print(f"{'n':>3} {'h1':>8} {'h2':>8} {'extrapolated':>13} {'closed form':>12} {'rel err':>9}")
    for r in rows:
        if r[5] == "":
            print(f"{r[0]:>3} {r[1]:>8.4g} {r[2]:>8.4g} {r[9]}")
            continue
        print(f"{r[0]:>3} {r[1]:>8.4g} {r[2]:>8.4g} {r[5]:>13.5f} {r[6]:>12.5f} {r[7]:>9.2%}")
    return 0 if all(r[8] for r in rows) else 1


def run_wolff(s: Scenario) -> int:
    p = s.params
    n = p["n"]
    _positive(p, "r", "wolff")
    atoms = _atoms(p["atoms"] if p["atoms"] is not None else [[0.0] * n + [1.0]], n, "wolff")
    pts = p["points"] if p["points"] is not None else [[d] + [0.0] * (n - 1) for d in (0.05, 0.1, 0.2, 0.5)]
    if not all(isinstance(x, list) and len(x) == n for x in pts):
        raise ConfigError(f"[wolff] key 'points': each point needs {n} coordinates")
    mu = RadonMeasure(atoms)
    rows = []
    for x in pts:
        ev = wolff.wolff_potential(mu, x, p["r"], p["nodes"])
        oracle = 0.0
        for a, m in atoms:
            d = float(np.linalg.norm(np.asarray(x, float) - a))
            oracle = math.inf if d == 0 else oracle
            if len(atoms) == 1 and 0 < d < p["r"]:
                oracle = m ** (1 / (n - 1)) * math.log(p["r"] / d)
        if len(atoms) != 1:
            oracle = float("nan")
        rows.append([*map(float, x), p["r"], ev.value, ev.error, oracle])
    s.out.mkdir(parents=True, exist_ok=True)
    header = [f"x{k + 1}" for k in range(n)] + ["r", "value", "quadrature_error", "single_atom_closed_form"]
    io.write_csv(rows, header, s.out / "wolff.csv")
    io.write_json({"n": n, "r": p["r"], "nodes": p["nodes"], "rows": rows}, s.out / "wolff.json")
    for r in rows:
        print(" ".join(f"{v:.6g}" for v in r))
    return 0


def _thin_set(kind: str, n: int, i_min: int, i_max: int) -> thin.PointSet:
    if kind == "chain":
        return thin.ball_chain(n, i_min, i_max + 2)
    if kind == "annuli":
        return thin.solid_annuli(n)
    return thin.PointSet(n, lambda x: np.linalg.norm(x, axis=-1) <= 3.0, (), None, (True,) * n)


def run_thinness(s: Scenario) -> int:
    p = s.params
    _positive(p, "h", "thinness")
    if not 1 <= p["i_min"] <= p["i_max"]:
        raise ConfigError("[thinness] keys 'i_min'/'i_max': need 1 <= i_min <= i_max")
    E = _thin_set(p["set"], p["n"], p["i_min"], p["i_max"])
    if p["invert"]:
        E = E.inverted()
    eps = p["epsilon"] or p["h"]
    rep = thin.thinness_series(E, p["i_min"], p["i_max"], p["h"], eps, s.threads, p["window"])
    ray = thin.ray_escape(E, p["i_min"], p["i_max"], p["rays"], p["h"], s.seed)
    s.out.mkdir(parents=True, exist_ok=True)
    io.write_csv(rep.rows(), ["i", "capacity", "term", "partial_sum"], s.out / "thinness.csv")
    io.write_json({"set": p["set"], "inverted": p["invert"], "center": "infinity" if E.center is None else E.center,
                   "h": p["h"], "epsilon": eps, "window": p["window"], "verdict_margin": thin.VERDICT_MARGIN,
                   "verdict": rep.verdict, "slope": rep.slope, "notes": rep.notes, "seed": s.seed,
                   "ray": ray}, s.out / "thinness.json")
    print(f"thinness: {p['set']}{' (inverted)' if p['invert'] else ''} -> {rep.verdict.value}, slope {rep.slope}")
    print("ray:", "none found" if ray is None else f"i0={ray.i0} r0={ray.r0:g} clearance={ray.clearance:.3g}")
    return 0


def run_blowdown(s: Scenario) -> int:
    p = s.params
    n = p["n"]
    if not 0 < p["r_min"] < p["r_max"] < 1:
        raise ConfigError("[blowdown] keys 'r_min'/'r_max': need 0 < r_min < r_max < 1")
    info = {"field": p["field"], "n": n, "tolerance": p["tolerance"]}
    if p["field"] == "synthetic":
        m, amp = float(p["m"]), float(p["amplitude"])

        def w(x):
            r = np.linalg.norm(x, axis=-1)
            return m * np.log(1 / r) + amp * np.sin(5 * r) + amp * x[..., 0] / r

        radii = np.geomspace(p["r_max"], p["r_min"], p["count"])
        info.update(m_true=m, amplitude=amp)
    else:
        h = p["h"] or (1 / 128 if n == 2 else 1 / 32)
        eps = p["epsilon"] or h
        beta = sphere_area(n) if p["beta"] is None else float(p["beta"])
        g = Grid.centered(n, 1 + 2 * h, h, True)
        u, rep = solve_dirichlet(DirichletProblem.ball(g, 1.0, RadonMeasure.dirac(np.zeros(n), beta),
                                                       float(p["boundary"]), eps))
        w = lambda x: u.sample(x, order=3)  # noqa: E731
        radii = np.geomspace(min(p["r_max"], 0.8), max(p["r_min"], 6 * h), p["count"])
        info.update(h=h, epsilon=eps, beta=beta, boundary=p["boundary"], solver=rep,
                    m_closed_form=(beta / sphere_area(n)) ** (1 / (n - 1)))
    prof = asy.quotient_profile(w, radii, n=n)
    info.update(m=prof.m, gamma_minus=prof.gamma_minus, lower_constant=prof.lower_constant,
                monotone_min=prof.is_monotone(p["tolerance"]))
    s.out.mkdir(parents=True, exist_ok=True)
    io.write_csv(prof.rows(), ["radius", "min_quotient", "median_quotient", "max_quotient"], s.out / "blowdown.csv")
    io.write_json(info, s.out / "blowdown.json")
    print(f"blowdown: m={prof.m:.5f} gamma_minus={prof.gamma_minus:.5f} monotone={info['monotone_min']}")
    return 0


def run_bm(s: Scenario) -> int:
    p = s.params
    n = p["n"]
    h = p["h"] or (1 / 64 if n == 2 else 1 / 20)
    deltas = p["deltas"] or np.linspace(0.1, 0.9, 9).tolist()
    if not all(isinstance(d, NUM) and 0 < d < 1 for d in deltas):
        raise ConfigError("[bm] key 'deltas': values must lie in (0, 1)")
    g, dom, fam = mt.standard_family(n, h, p["radius"])
    rep = mt.bm_sweep({k: mt.BMProblem(f, dom) for k, f in fam.items()}, deltas, p["nodes"])
    s.out.mkdir(parents=True, exist_ok=True)
    io.write_csv([[r.member, r.delta, r.lhs, r.scaled] for r in rep.rows], ["member", "delta", "lhs", "lhs_delta_n1"],
                 s.out / "bm.csv")
    ok = rep.all_finite and rep.envelope_ratio < p["ratio_bound"]
    io.write_json({"n": n, "h": h, "radius": p["radius"], "nodes": p["nodes"], "deltas": deltas,
                   "envelope": rep.envelope, "envelope_ratio": rep.envelope_ratio, "ratio_bound": p["ratio_bound"],
                   "fitted_c": rep.fitted_c, "all_finite": rep.all_finite, "monotone": rep.monotone, "ok": ok},
                  s.out / "bm.json")
    print(f"bm: n={n} envelope max/min={rep.envelope_ratio:.3f} fitted c(n)={rep.fitted_c:.3e}")
    return 0 if ok else 1


def run_geometry(s: Scenario) -> int:
    p = s.params
    n = p["n"]
    out = {"mode": p["mode"], "n": n}
    rows, header = [], []
    if p["mode"] == "conformal":
        _positive(p, "h", "geometry")
        g = Grid.centered(n, p["half_width"], p["h"])
        header = ["m", "flux_m", "profile_m", "difference"]
        for m in p["m"]:
            phi = geo.capped_log_profile(m, p["delta"])
            fm = geo.flux_m(geo.ConformalMetric(ScalarField.from_function(g, phi), n), p["radii"])
            pm = geo.profile_m(geo.ConformalMetric(phi, n))
            rows.append([m, fm.m, pm, abs(fm.m - pm)])
        out.update(h=p["h"], delta=p["delta"], radii=p["radii"])
    elif p["mode"] == "hypersurface":
        a, c = float(p["slope"]), float(p["offset"])
        if p["profile"] == "equidistant":
            rho = lambda x: a * np.log(np.linalg.norm(x, axis=-1)) + c  # noqa: E731
        elif p["profile"] == "horosphere":
            rho = lambda x: np.full(x.shape[:-1], c)  # noqa: E731
        else:
            rho = lambda x: a * np.log(np.linalg.norm(x, axis=-1)) + np.sin(x[..., 0])  # noqa: E731
        S = geo.HypersurfaceGraph(rho, n)
        rep = geo.hypersurface_asymptote(S)
        eb = geo.equidistant_bound(S, np.geomspace(1, 1e3, 12))
        header = ["quantity", "value"]
        rows = [["m", rep.m], ["equidistant_C", eb.C if eb.C is not None else float("nan")]]
        out.update(profile=p["profile"], asymptote=rep, equidistant=eb)
    else:
        header = ["kappa", "strictly_convex", "nonnegative_ricci", "nonnegative_sectional"]
        for k in p["curvatures"]:
            if not isinstance(k, list) or not k:
                raise ConfigError("[geometry] key 'curvatures': a list of principal curvature lists")
            c = geo.curvature_condition(k)
            rows.append([" ".join(repr(float(v)) for v in k), c.strictly_convex, c.nonnegative_ricci,
                         c.nonnegative_sectional])
    out["rows"] = rows
    s.out.mkdir(parents=True, exist_ok=True)
    io.write_csv(rows, header, s.out / "geometry.csv")
    io.write_json(out, s.out / "geometry.json")
    for r in rows:
        print(" ".join(str(v) for v in r))
    return 0


def run_acceptance(s: Scenario) -> int:
    p = s.params
    _positive(p, "scale", "acceptance")
    only = p["only"] or None
    if only and not all(k in acc.CRITERIA for k in only):
        raise ConfigError(f"[acceptance] key 'only': criteria are numbered 1..{len(acc.CRITERIA)}")
    results = acc.run_all(p["scale"], only, echo=print, seed=s.seed)
    s.out.mkdir(parents=True, exist_ok=True)
    io.write_csv([[r.number, r.title, "PASS" if r.passed else "FAIL", r.summary] for r in results],
                 ["criterion", "title", "status", "summary"], s.out / "acceptance.csv")
    io.write_json({"scale": p["scale"], "seed": s.seed, "results": [{"number": r.number, "title": r.title, "passed": r.passed,
                                                       "summary": r.summary, "details": r.details} for r in results]},
                  s.out / "acceptance.json")
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


RUNNERS = {
    "solve": run_solve, "capacity": run_capacity, "wolff": run_wolff, "thinness": run_thinness,
    "blowdown": run_blowdown, "bm": run_bm, "geometry": run_geometry, "acceptance": run_acceptance,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlpotential", description="n-Laplacian potential theory experiments")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="TOML or JSON scenario file")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--grid-h", type=float, help="grid spacing override")
        sp.add_argument("--epsilon", type=float, help="regularization override")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        if name == "capacity":
            sp.add_argument("--oracle", choices=CHOICES[("capacity", "oracle")])
    return ap


def make_scenario(args) -> Scenario:
    params = load_config(args.config, args.subcommand)
    schema = SCHEMA[args.subcommand]
    if args.grid_h is not None:
        if "h" not in schema:
            raise ConfigError(f"--grid-h does not apply to '{args.subcommand}'")
        if not args.grid_h > 0:
            raise ConfigError("--grid-h must be positive")
        params["h"] = args.grid_h
    if args.epsilon is not None:
        if "epsilon" in schema:
            params["epsilon"] = args.epsilon
        elif "epsilon_factor" in schema and params.get("h"):
            params["epsilon_factor"] = args.epsilon / params["h"]
        else:
            raise ConfigError(f"--epsilon does not apply to '{args.subcommand}' without --grid-h")
        if not args.epsilon > 0:
            raise ConfigError("--epsilon must be positive")
    if getattr(args, "oracle", None):
        params["oracle"] = args.oracle
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    return Scenario(args.subcommand, params, args.out, args.seed, args.threads, args.config)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        s = make_scenario(args)
        return RUNNERS[s.subcommand](s)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
