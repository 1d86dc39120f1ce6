"""Command-line interface: ``pc2 fit | eval | uq | bench``.

Exit codes: 0 success, 1 usage or parse error, 2 solver failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import bench as bench_mod
from .config import ConfigError, _json_safe, atomic_write, load_config, load_model, parse_config, save_model
from .design import OverConstrainedError
from .expression import ExpressionError
from .operators import ProblemError, residual
from .solver import FitError, TrainingData, fit
from .uq import UQError, global_mean, global_variance, local_fields, sobol_indices

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _emit(text: str, path: str | None):
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# fit


def _resolve_config(spec: str):
    if os.path.exists(spec):
        return load_config(spec)
    if spec in bench_mod.CASE_IDS:
        return parse_config(bench_mod.case_text(spec), source=f"{spec}.yaml")
    raise OSError(f"config file not found: {spec}")


def _read_training(path: str, problem, base: str | None) -> TrainingData:
    if base and not os.path.isabs(path):
        path = os.path.join(os.path.dirname(base), path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: empty data file")
    header = [h.strip() for h in rows[0]]
    need = problem.names + ["u"]
    missing = [n for n in need if n not in header]
    if missing:
        raise UsageError(f"{path}: missing columns {missing}")
    vals = np.array([[float(r[header.index(n)]) for n in need] for r in rows[1:]], dtype=float)
    vals = vals.reshape(-1, len(need))
    return TrainingData.from_physical(problem.variables, vals[:, :-1], vals[:, -1])


def cmd_fit(args) -> int:
    cfg = _resolve_config(args.config)
    opts = cfg.fit
    seed = opts.seed if args.seed is None else args.seed
    n_sim = opts.n_sim if args.n_sim is None else args.n_sim
    method = args.method or opts.method
    problem = cfg.problem
    if opts.data is not None and args.n_sim is None:
        data = _read_training(opts.data, problem, cfg.source)
    elif n_sim == 0:
        data = TrainingData.empty(problem.M)
    elif problem.reference is None:
        raise UsageError("n_sim > 0 needs either fit.data or a reference solution to generate responses")
    else:
        data = bench_mod.synthetic_data(problem, problem.reference, n_sim,
                                        bench_mod.child_seed(seed, bench_mod._DESIGN), opts.design)
    t0 = time.perf_counter()
    model, rep = fit(problem, data, method, opts.p_values, opts.n_bc, seed, opts.sampler, opts.n_iter, opts.tol)
    elapsed = (time.perf_counter() - t0) * 1e3
    out = args.out or cfg.output.get("model") or f"{problem.name}.model.json"
    report = rep.as_dict()
    report.update({"case": problem.name, "seed": seed, "model": out})
    if args.timing:
        report["fit_ms"] = round(elapsed, 3)
    save_model(out, model, problem, {k: v for k, v in report.items() if k not in ("model", "fit_ms")})
    sys.stdout.write(json.dumps(_json_safe(report), sort_keys=True, indent=1) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def parse_grid(spec: str, variables) -> np.ndarray:
    """Tensor grid from ``"N"`` (N points per variable over its bounds) or ``"x=a:b:n,t=a:b:n"``."""
    names = [v.name for v in variables]
    spec = spec.strip()
    axes = {}
    if spec.isdigit():
        n = int(spec)
        if n < 1:
            raise UsageError("grid size must be positive")
        axes = {v.name: np.linspace(v.lower, v.upper, n) for v in variables}
    else:
        for part in spec.split(","):
            try:
                name, rng = part.split("=")
                lo, hi, n = rng.split(":")
                axes[name.strip()] = np.linspace(float(lo), float(hi), int(n))
            except ValueError:
                raise UsageError(f"bad grid component {part!r}; expected name=lower:upper:count") from None
        unknown = sorted(set(axes) - set(names))
        if unknown:
            raise UsageError(f"grid names unknown variable {unknown[0]!r}")
        missing = [n for n in names if n not in axes]
        if missing:
            raise UsageError(f"grid does not cover variables {missing}")
    mesh = np.meshgrid(*[axes[n] for n in names], indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _read_points(path: str, names) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        return np.empty((0, len(names)))
    first = [c.strip() for c in rows[0]]
    try:
        [float(c) for c in first]
        header = None
    except ValueError:
        header = first
    body = rows[1:] if header else rows
    if header:
        missing = [n for n in names if n not in header]
        if missing:
            raise UsageError(f"{path}: missing columns {missing}")
        cols = [header.index(n) for n in names]
    else:
        width = {len(r) for r in body}
        if width != {len(names)}:
            raise UsageError(f"{path}: expected {len(names)} columns ({', '.join(names)}), found {sorted(width)}")
        cols = list(range(len(names)))
    try:
        return np.array([[float(r[c]) for c in cols] for r in body], dtype=float).reshape(-1, len(names))
    except (ValueError, IndexError):
        raise UsageError(f"{path}: non-numeric or short row") from None


def cmd_eval(args) -> int:
    model, problem = load_model(args.model)
    names = model.names
    if (args.points is None) == (args.grid is None):
        raise UsageError("give exactly one of --points or --grid")
    x = _read_points(args.points, names) if args.points else parse_grid(args.grid, model.transforms)
    u = model.evaluate(x) if len(x) else np.empty(0)
    header = names + ["u"]
    cols = [u]
    if args.residual:
        if problem is None:
            raise UsageError("model file carries no problem definition; --residual is unavailable")
        cols.append(residual(problem.pde, model, model.to_standard(x)) if len(x) else np.empty(0))
        header.append("residual")
    flags = model.extrapolated(x).astype(int) if len(x) else np.empty(0, dtype=int)
    header.append("extrapolated")
    rows = [[*map(float, x[i]), *[float(c[i]) for c in cols], int(flags[i])] for i in range(len(x))]
    _emit(_csv(rows, header), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# uq


def cmd_uq(args) -> int:
    model, _ = load_model(args.model)
    rmask = model.random_mask
    if not rmask.any():
        raise UQError("the model has no random variables, so there is nothing to quantify; "
                      "declare at least one variable with role: random")
    rnames = [t.name for t in model.transforms if t.is_random]
    if rmask.all():
        doc = {"mean": global_mean(model), "variance": global_variance(model)}
        if doc["variance"] > 0:
            groups = sobol_indices(model)
            doc["sobol_first"] = {n: groups.get((i,), 0.0) for i, n in enumerate(rnames)}
            doc["sobol_total"] = {
                n: 1.0 - sum(v for k, v in groups.items() if i not in k) for i, n in enumerate(rnames)
            }
        text = json.dumps(_json_safe(doc), sort_keys=True, indent=1) + "\n"
        _emit(text, os.path.join(args.out_dir, "moments.json") if args.out_dir else None)
        return EXIT_OK

    det = [t for t in model.transforms if not t.is_random]
    dnames = [t.name for t in det]
    pts = parse_grid(args.grid, det)
    mean, var = local_fields(model, pts)
    sd = np.sqrt(var)
    out_dir = args.out_dir or "."
    tables = {
        "mean.csv": (dnames + ["mean"], [mean]),
        "mean_pm_sigma.csv": (dnames + ["mean_minus_sigma", "mean_plus_sigma"], [mean - sd, mean + sd]),
        "variance.csv": (dnames + ["variance"], [var]),
    }
    if args.sobol:
        from .uq import reduced_coefficients

        uniq, coef = reduced_coefficients(model, pts)
        nonconst = uniq.sum(axis=1) > 0
        s_cols = []
        for i in range(len(rnames)):
            only_i = nonconst & (uniq[:, i] > 0) & (uniq.sum(axis=1) == uniq[:, i])
            with np.errstate(invalid="ignore", divide="ignore"):
                s = np.where(var > 0, np.sum(coef[:, only_i] ** 2, axis=1) / var, np.nan)
            s_cols.append(s)
        tables["sobol.csv"] = (dnames + [f"S_{n}" for n in rnames], s_cols)
    for fname, (header, cols) in tables.items():
        rows = [[*map(float, pts[i]), *[float(c[i]) for c in cols]] for i in range(len(pts))]
        atomic_write(os.path.join(out_dir, fname), _csv(rows, header))
        sys.stdout.write(f"wrote {os.path.join(out_dir, fname)} ({len(rows)} rows)\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("expected non-negative integers")
    return vals


def cmd_bench(args) -> int:
    ids = list(bench_mod.CASE_IDS) if args.cases == ["all"] else args.cases
    unknown = [c for c in ids if c not in bench_mod.CASE_IDS]
    if unknown:
        raise UsageError(f"unknown case {unknown[0]!r}; expected one of {', '.join(bench_mod.CASE_IDS)} or 'all'")
    methods = args.methods.split(",") if args.methods else None
    for cid in ids:
        case = bench_mod.builtin_case(cid)
        trials = args.trials if args.trials is not None else case.config.bench.trials
        rep = bench_mod.run_convergence(
            case, methods, args.nsim_grid, trials, args.seed, (args.validation, 100), args.jobs, args.timing
        )
        for suffix, text in (("trials", rep.trials_csv()), ("aggregate", rep.aggregate_csv())):
            path = os.path.join(args.out_dir, f"{cid}_{suffix}.csv")
            atomic_write(path, text)
            sys.stdout.write(f"wrote {path}\n")
        for (m, n), failed in sorted(rep.flags.items()):
            sys.stdout.write(f"warning: {cid} {m} n_sim={n}: {failed} of {trials} trials failed\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pc2", description="Physically constrained polynomial chaos expansions")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a model from a problem configuration")
    f.add_argument("config", help="YAML configuration file, or a built-in case id")
    f.add_argument("--out", help="model file to write (default: output.model or <name>.model.json)")
    f.add_argument("--seed", type=int, help="override fit.seed")
    f.add_argument("--n-sim", type=int, dest="n_sim", help="override fit.n_sim")
    f.add_argument("--method", choices=["kkt", "lar-kkt", "lar"], help="override fit.method")
    f.add_argument("--timing", action="store_true", help="report the fit time (makes output run-dependent)")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="evaluate a model at points")
    e.add_argument("model")
    e.add_argument("--points", help="CSV of points (header with variable names, or bare columns)")
    e.add_argument("--grid", help="N, or name=lower:upper:count,... for a tensor grid")
    e.add_argument("--residual", action="store_true", help="add the PDE residual column")
    e.add_argument("--out", help="output CSV (default: standard output)")
    e.set_defaults(func=cmd_eval)

    q = sub.add_parser("uq", help="moments, local statistics and Sobol indices")
    q.add_argument("model")
    q.add_argument("--grid", default="101", help="grid over the deterministic variables (default 101 per axis)")
    q.add_argument("--out-dir", dest="out_dir", help="directory for field tables")
    q.add_argument("--sobol", action="store_true", help="also write first-order Sobol index fields")
    q.set_defaults(func=cmd_uq)

    b = sub.add_parser("bench", help="replicated convergence study of built-in cases")
    b.add_argument("cases", nargs="+", help=f"case ids ({', '.join(bench_mod.CASE_IDS)}) or 'all'")
    b.add_argument("--trials", type=int, help="replications per cell (default from the case, 20)")
    b.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    b.add_argument("--nsim-grid", dest="nsim_grid", type=_int_list, help="comma-separated n_sim values")
    b.add_argument("--methods", help="comma-separated subset of kkt,lar-kkt,lar")
    b.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    b.add_argument("--validation", type=int, default=10_000, help="interior validation points (default 10000)")
    b.add_argument("--out-dir", dest="out_dir", default=".", help="directory for CSV files")
    b.add_argument("--timing", action="store_true", help="fill the fit_ms column (makes output run-dependent)")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trials", None) is not None and args.trials < 1:
        parser.error("--trials must be at least 1")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    if getattr(args, "methods", None):
        bad = [m for m in args.methods.split(",") if m not in ("kkt", "lar-kkt", "lar")]
        if bad:
            parser.error(f"unknown method {bad[0]!r}")
    try:
        return args.func(args)
    except (FitError, OverConstrainedError) as exc:
        sys.stderr.write(f"pc2: fit failed: {exc}\n"
                         "hint: try a different seed (fresh virtual points), a lower p, or fewer boundary points\n")
        return EXIT_SOLVER
    except (ConfigError, ProblemError, ExpressionError, UQError, UsageError) as exc:
        sys.stderr.write(f"pc2: error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"pc2: I/O error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
