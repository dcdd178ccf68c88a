"""Command-line experiment runner.

    trapmodes spectrum --geometry cross --params 5,5,5,5 --modes 5
    trapmodes sweep --config fig3.ini --jobs 4 --out results/
    trapmodes reproduce fig8

Exit codes: 0 success, 2 invalid input, 3 solver failure.  Errors are
written to stderr as one JSON object per line.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bentstrip, condition, reduced
from .config import KINDS, ConfigError, ExperimentConfig, load_config, parse_value
from .eigensolver import (PI2, BracketError, SolverError, default_h, find_a_min,
                          localization_verdict, solve_domain)
from .geometry import GeometryError, build_domain, write_mesh
from .transverse import decay_rate_bound

log = logging.getLogger("trapmodes")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3
FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig8", "table-bent")
SQRT2 = math.sqrt(2.0)

_OFFSET = {"truncated_l": 1, "coupled_cross": 1}
_LEADING = {"truncated_l": "ell", "coupled_cross": "eps"}


# ---------------------------------------------------------------------------
# geometry families


def family(name: str, params, variable: str):
    """Map a scalar to catalog parameters: a (all lengths), a1..a4, ell or eps."""
    params = [float(p) for p in params]
    off = _OFFSET.get(name, 0)
    if variable == "a":
        idx = list(range(off, len(params)))
    elif variable.startswith("a") and variable[1:].isdigit():
        idx = [off + int(variable[1:]) - 1]
    elif variable == _LEADING.get(name):
        idx = [0]
    else:
        raise ConfigError(f"sweep variable {variable!r} does not apply to {name}")
    if not idx or max(idx) >= len(params):
        raise ConfigError(f"sweep variable {variable!r} out of range for {name}{tuple(params)}")

    def make(value):
        p = list(params)
        for i in idx:
            p[i] = float(value)
        return build_domain(name, p)
    return make


def _spec(cfg: ExperimentConfig):
    return build_domain(cfg.require("geometry", "name"), cfg.get("geometry", "params", ()))


def _h(cfg, spec):
    h = cfg.get("solver", "h")
    return default_h(spec) if h is None else h


# ---------------------------------------------------------------------------
# experiments; each returns (table rows, json payload)


def _eig_rows(result, verdicts=None):
    rows = []
    for j, lam in enumerate(result.best):
        row = {"index": j + 1, "lambda": float(lam), "lambda_over_pi2": float(lam / PI2),
               "lambda_h": float(result.eigenvalues[j]),
               "lambda_h_over_pi2": float(result.eigenvalues[j] / PI2),
               "residual": float(result.residuals[j])}
        if result.coarse is not None:
            row["lambda_2h"] = float(result.coarse[j])
        row["trapped"] = bool(lam < PI2)
        rows.append(row)
    return rows


def run_spectrum(cfg):
    spec = _spec(cfg)
    res = solve_domain(spec, _h(cfg, spec), k=cfg.get("solver", "modes"),
                       extrapolate=cfg.get("solver", "extrapolate"), tol=cfg.get("solver", "tol"))
    rows = _eig_rows(res)
    meta = {k: v for k, v in res.metadata.items() if k != "extrapolation_error"}
    payload = {"geometry": spec.name, "params": list(spec.params), "h": res.h,
               "eigenvalues": rows, "degenerate_pairs": res.degenerate_pairs,
               "mesh": _jsonable(meta)}
    return rows, payload, res


def _sweep_point(args):
    name, params, variable, value, h, extrapolate = args
    spec = family(name, params, variable)(value)
    hh = default_h(spec) if h is None else h
    r = solve_domain(spec, hh, k=1, extrapolate=extrapolate)
    return {"variable": variable, "value": float(value), "lambda1": float(r.best[0]),
            "lambda1_over_pi2": float(r.best[0] / PI2), "lambda1_h": float(r.eigenvalues[0]),
            "extrapolation_error": float(abs(r.best[0] - r.eigenvalues[0])),
            "trapped": bool(r.best[0] < PI2), "h": hh}


def _grid(start, stop, step):
    if step <= 0 or stop < start:
        raise ConfigError("sweep needs step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(n + 1)]


def run_sweep(cfg, jobs=None):
    name = cfg.require("geometry", "name")
    params = cfg.get("geometry", "params", ())
    variable = cfg.get("sweep", "variable", "a")
    values = _grid(cfg.require("sweep", "start"), cfg.require("sweep", "stop"),
                   cfg.require("sweep", "step"))
    family(name, params, variable)               # validate before dispatch
    tasks = [(name, params, variable, v, cfg.get("solver", "h"),
              cfg.get("solver", "extrapolate")) for v in values]
    rows = _pool_map(_sweep_point, tasks, jobs)
    rows.sort(key=lambda r: r["value"])
    return rows, {"geometry": name, "params": list(params), "variable": variable,
                  "rows": rows}


def _pool_map(fn, tasks, jobs):
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def _trial(cfg):
    name = cfg.get("condition", "trial")
    if name is None:
        raise ConfigError("missing required key [condition] trial")
    if name == "bent_strip":
        return condition.bent_trial(cfg.get("condition", "alpha"))
    return condition.trial_catalog()[name]()


def run_condition(cfg):
    spec = _spec(cfg)
    trial = _trial(cfg)
    co = condition.coefficients(trial, spec, N=cfg.get("solver", "truncation"),
                                use_analytic=not cfg.get("condition", "numeric"))
    rep = condition.check(co, spec.lengths)
    d = rep.to_dict()
    if d["eta"] is not None:
        d["eta_eps"] = condition.threshold_eta(co, cfg.get("condition", "eps_coth"))
    d.update({"trial": trial.name, "geometry": spec.name, "a": list(spec.lengths)})
    row = {k: (";".join(repr(float(x)) for x in v) if isinstance(v, list) else v)
           for k, v in d.items()}
    return [row], d


def run_reduced(cfg):
    spec = _spec(cfg)
    h = cfg.get("solver", "h") or 1 / 32
    summ = reduced.summarize(spec, h, cfg.get("solver", "truncation"),
                             cfg.get("reduced", "grid_points"), cfg.get("reduced", "tol"),
                             cfg.get("reduced", "extrapolate"))
    d = summ.to_dict()
    return [d], d


def run_bent(cfg, jobs=None):
    N = cfg.get("bent", "N")
    eps = cfg.get("bent", "eps_coth")
    alphas = cfg.get("bent", "alpha") or tuple(np.round(np.arange(0.1, 0.91, 0.1), 10))
    rows = []
    for r in bentstrip.scan(alphas, N, eps):
        rows.append(dict(zip(("alpha", "beta", "sigma", "kappa_bound", "kappa_direct",
                              "eta_bound", "eta_direct", "a_th"), map(float, r)),
                         label="scan"))
    opt = {}
    for method in ("bound", "direct"):
        al, eta, a_th = bentstrip.maximize_eta(method, eps, N)
        opt[method] = {"alpha": al, "eta": eta, "a_th": a_th}
        rows.append({"alpha": al, "eta_" + method: eta, "a_th": a_th, "label": f"max_{method}"})
    payload = {"N": N, "eps_coth": eps, "si_limit": bentstrip.si_limit(), "optimum": opt,
               "rows": [r for r in rows if r["label"] == "scan"]}
    return rows, payload


def run_decay(cfg):
    spec = _spec(cfg)
    res = solve_domain(spec, _h(cfg, spec), k=cfg.get("solver", "modes"),
                       extrapolate=cfg.get("solver", "extrapolate"))
    rows, summary = [], []
    for v in localization_verdict(res, spec):
        if not v.trapped:
            summary.append({"mode": v.index + 1, "lambda_over_pi2": v.over_pi2, "trapped": False})
            continue
        lam_h = float(res.eigenvalues[v.index])
        pred = decay_rate_bound(v.eigenvalue)
        for i, (x, I) in enumerate(v.profiles):
            bound = I[0] * np.exp(-decay_rate_bound(lam_h) * x)
            for xx, ii, bb in zip(x, I, bound):
                rows.append({"mode": v.index + 1, "branch": i + 1, "x": float(xx),
                             "I": float(ii), "bound": float(bb)})
            summary.append({"mode": v.index + 1, "branch": i + 1,
                            "lambda_over_pi2": v.over_pi2, "trapped": True,
                            "predicted_rate": pred, "fitted_rate": v.rates[i],
                            "loglinear_slope": v.slopes[i],
                            "max_ratio": float(np.max(I / np.maximum(bound, 1e-300)))})
    return rows, {"geometry": spec.name, "params": list(spec.params), "summary": summary,
                  "profiles": rows}, res


def run_amin(cfg):
    name = cfg.require("geometry", "name")
    params = cfg.get("geometry", "params", ())
    variable = cfg.get("sweep", "variable", "a")
    lo, hi = cfg.require("amin", "lo"), cfg.require("amin", "hi")
    fam = family(name, params, variable)
    try:
        a, hist = find_a_min(fam, (lo, hi), cfg.get("solver", "h"), cfg.get("amin", "atol"))
        crossing = True
    except BracketError as exc:
        a, hist, crossing = None, [], False
        log.info("%s", exc)
    d = {"geometry": name, "variable": variable, "bracket": [lo, hi], "a_min": a,
         "crossing": crossing, "history": [list(p) for p in hist]}
    return [{"a_min": a, "crossing": crossing, "lo": lo, "hi": hi}], d


# ---------------------------------------------------------------------------
# reproduction of the published numbers


def _cmp(figure, quantity, computed, expected, tol):
    ok = computed is not None and abs(computed - expected) <= tol
    return {"figure": figure, "quantity": quantity, "computed": computed,
            "expected": expected, "tol": tol, "pass": bool(ok)}


def reproduce(figure: str, h=None, jobs=None):
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    rows, extra = [], {}
    if figure == "fig3":
        curves = {}
        values = [0.25 * k for k in range(1, 13)]
        for name, params in (("l_shape", (1, 1)), ("bent_strip", (1, 1)),
                             ("truncated_l", (0, 1, 1))):
            tasks = [(name, params, "a", v, h, True) for v in values]
            pts = _pool_map(_sweep_point, tasks, jobs)
            curves[name] = pts
            lam = [p["lambda1_over_pi2"] for p in pts]
            rows.append({"figure": figure, "quantity": f"{name} nonincreasing",
                         "computed": float(max(np.diff(lam))), "expected": 0.0,
                         "tol": 1e-6, "pass": bool(np.all(np.diff(lam) <= 1e-6))})
        for name, params, bracket, target, tol in (("l_shape", (1, 1), (0.5, 1.5), 0.84, 0.03),
                                                   ("bent_strip", (1, 1), (2.0, 3.0), 2.44, 0.05)):
            a, _ = find_a_min(family(name, params, "a"), bracket, h)
            rows.append(_cmp(figure, f"a_min {name}", a, target, tol))
        try:
            find_a_min(family("truncated_l", (0, 1, 1), "a"), (0.25, 20.0), h)
            crossing = True
        except BracketError:
            crossing = False
        rows.append({"figure": figure, "quantity": "truncated_l(0) crossing", "computed": crossing,
                     "expected": False, "tol": 0, "pass": not crossing})
        extra["curves"] = curves
    elif figure == "fig4":
        r = solve_domain(build_domain("cross", (5, 5, 5, 5)), h, k=5)
        for j, target in enumerate((0.661, 1.032, 1.032, 1.036, 1.044)):
            rows.append(_cmp(figure, f"cross lambda_{j + 1}/pi^2", float(r.best_over_pi2[j]),
                             target, 5e-3))
    elif figure in ("fig5", "fig6"):
        a = 2 if figure == "fig5" else 20
        targets = (0.9357, 1.0086, 1.1435) if a == 2 else (0.9302, 0.9879, 1.0032)
        for (name, params, tol), target in zip(
                (("l_shape", (a, a), 5e-3), ("bent_strip", (a, a), 1e-2),
                 ("truncated_l", (0, a, a), 5e-3)), targets):
            r = solve_domain(build_domain(name, params), h, k=1)
            rows.append(_cmp(figure, f"{name}(a={a}) lambda_1/pi^2", float(r.best_over_pi2[0]),
                             target, tol))
    elif figure == "fig8":
        hh = 1 / 40 if h is None else h
        lam = {}
        for eps, target in ((0.0, 1.05), (0.4 * SQRT2, 1.02), (0.5 * SQRT2, 0.97),
                            (SQRT2, 0.67)):
            r = solve_domain(build_domain("coupled_cross", (eps, 5, 5, 5, 5)), hh, k=1)
            lam[eps] = float(r.best_over_pi2[0])
            rows.append(_cmp(figure, f"coupled eps={eps / SQRT2:g}*sqrt2 lambda_1/pi^2",
                             lam[eps], target, 1e-2))
        bracketed = lam[0.4 * SQRT2] > 1 > lam[0.5 * SQRT2]
        rows.append({"figure": figure, "quantity": "eps_c in (0.4 sqrt2, 0.5 sqrt2)",
                     "computed": bracketed, "expected": True, "tol": 0, "pass": bracketed})
    else:
        for method, target in (("bound", 0.7154), ("direct", 0.7256)):
            al, eta, a_th = bentstrip.maximize_eta(method)
            rows.append(_cmp(figure, f"eta_{method}", eta, target, 2e-3))
            if method == "bound":
                rows.append(_cmp(figure, "a_th", a_th, 2.7956, 8e-3))
        rows.append(_cmp(figure, "Si(2pi)/(2pi)", bentstrip.si_limit(), 0.2257, 1e-4))
    return rows, {"figure": figure, "summary": rows, **extra}


# ---------------------------------------------------------------------------
# output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def to_csv(rows) -> str:
    if not rows:
        return ""
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for k, v in r.items()})
    return buf.getvalue()


def to_json(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def emit(stem, rows, payload, fmt, out):
    text = to_csv(rows) if fmt == "csv" else to_json(payload)
    if out is None:
        sys.stdout.write(text)
        return None
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem}.{fmt}"
    path.write_text(text)
    return path


def _dump_fields(res, out):
    mesh = res.mesh
    write_mesh(mesh, out / "mesh.txt")
    rows = []
    for n, (x, y) in enumerate(mesh.nodes):
        row = {"node": n, "x": float(x), "y": float(y)}
        for j in range(res.eigenvectors.shape[1]):
            row[f"u{j + 1}"] = float(res.eigenvectors[n, j])
        rows.append(row)
    (out / "fields.csv").write_text(to_csv(rows))


# ---------------------------------------------------------------------------
# entry point


def _error(kind, message, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message), **extra},
                                sort_keys=True) + "\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path)
    common.add_argument("--out", type=Path)
    common.add_argument("--h", type=float)
    common.add_argument("--modes", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--geometry")
    common.add_argument("--params", help="comma-separated catalog parameters")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any config key")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="trapmodes", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, parents=[common])
        if kind == "condition":
            sp.add_argument("--trial")
    rp = sub.add_parser("reproduce", parents=[common])
    rp.add_argument("figure", choices=FIGURES)
    return p


def _merge_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.command != "reproduce":
        cfg.set("experiment", "kind", args.command)
    for item in args.set:
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        cfg.set(section.strip(), name.strip(), parse_value(section.strip(), name.strip(), value))
    if args.geometry:
        cfg.set("geometry", "name", args.geometry)
    if args.params:
        cfg.set("geometry", "params", parse_value("geometry", "params", args.params))
    if args.h is not None:
        cfg.set("solver", "h", args.h)
    if args.modes is not None:
        cfg.set("solver", "modes", args.modes)
    if args.format:
        cfg.set("output", "format", args.format)
    if args.out is not None:
        cfg.set("output", "dir", str(args.out))
    if getattr(args, "trial", None):
        cfg.set("condition", "trial", parse_value("condition", "trial", args.trial))
    return cfg


def run(cfg: ExperimentConfig, jobs=None, figure=None):
    """Execute one experiment; returns the written path (or None for stdout)."""
    fmt = cfg.get("output", "format")
    out = cfg.get("output", "dir")
    out = Path(out) if out else None
    res = None
    if figure is not None:
        rows, payload = reproduce(figure, cfg.get("solver", "h"), jobs)
        stem = figure
    else:
        kind = cfg.kind
        if kind is None:
            raise ConfigError("missing required key [experiment] kind")
        if kind == "spectrum":
            rows, payload, res = run_spectrum(cfg)
        elif kind == "decay":
            rows, payload, res = run_decay(cfg)
            if fmt == "csv":
                rows = payload["summary"] + rows
        elif kind == "sweep":
            rows, payload = run_sweep(cfg, jobs)
        elif kind == "condition":
            rows, payload = run_condition(cfg)
        elif kind == "reduced":
            rows, payload = run_reduced(cfg)
        elif kind == "bent-coeffs":
            rows, payload = run_bent(cfg, jobs)
        else:
            rows, payload = run_amin(cfg)
        stem = kind
    path = emit(stem, rows, payload, fmt, out)
    if res is not None and out is not None and (cfg.get("output", "mesh")
                                                or cfg.get("output", "fields")):
        _dump_fields(res, out)
    return path


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _merge_args(args)
        figure = args.figure if args.command == "reproduce" else None
        run(cfg, args.jobs, figure)
    except (ConfigError, GeometryError, condition.ConditionError) as exc:
        _error("validation", exc, type=type(exc).__name__)
        return EXIT_INVALID
    except (SolverError, BracketError) as exc:
        _error("solver", exc, type=type(exc).__name__)
        return EXIT_SOLVER
    except ValueError as exc:
        _error("validation", exc, type=type(exc).__name__)
        return EXIT_INVALID
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        _error("solver", exc, type=type(exc).__name__)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
