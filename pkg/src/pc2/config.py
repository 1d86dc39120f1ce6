"""Problem configuration files (YAML) and model files (JSON).

A configuration looks like::

    name: poisson1d
    variables:
      - {name: x, role: deterministic, bounds: [-1, 1]}
    pde:
      terms:
        - {coeff: "1", orders: {x: 2}}
      rhs: "2"
    bc:
      - {location: {x: -1}, rhs: "0"}                    # Dirichlet: u = rhs
      - {location: {x: 1}, orders: {x: 1}, rhs: "4"}     # single-term shorthand
    reference:
      solution: "(x + 1)^2"
    fit:
      method: kkt          # kkt | lar-kkt | lar
      p_range: [2, 10]     # inclusive, or a single integer
      n_sim: 2
      seed: 0

Errors carry the line and column of the offending entry.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field, fields, replace

import numpy as np
import yaml

from .expression import Expression, ExpressionError
from .model import Pc2Model
from .operators import LINEARIZATIONS, BoundaryCondition, LinearOperator, OperatorTerm, ProblemError, ProblemSpec
from .polybasis import DETERMINISTIC, RANDOM, BasisSet, VariableTransform
from .solver import METHODS

DEFAULT_SEED = 0
MODEL_FORMAT = "pc2-model"
MODEL_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 source: str | None = None):
        self.line, self.column, self.source = line, column, source
        where = ""
        if line is not None:
            where = f"{source or '<config>'}:{line}:{column}: "
        elif source:
            where = f"{source}: "
        super().__init__(where + message)


# ---------------------------------------------------------------------------
# YAML loading with positions


class _Marked(dict):
    """dict that remembers where each key and value started."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.marks = {}
        self.mark = None


class _MarkedList(list):
    def __init__(self, *args):
        super().__init__(*args)
        self.marks = []
        self.mark = None


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _Marked()
    out.mark = node.start_mark
    for k_node, v_node in node.value:
        key = loader.construct_object(k_node, deep=True)
        out[key] = loader.construct_object(v_node, deep=True)
        out.marks[key] = v_node.start_mark
    return out


def _construct_sequence(loader, node):
    out = _MarkedList()
    out.mark = node.start_mark
    for v_node in node.value:
        out.append(loader.construct_object(v_node, deep=True))
        out.marks.append(v_node.start_mark)
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)
_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_sequence)


class _Ctx:
    """Error reporting helper bound to a source name."""

    def __init__(self, source):
        self.source = source

    def fail(self, message, mark=None, offset=0):
        if mark is None:
            raise ConfigError(message, source=self.source)
        raise ConfigError(message, mark.line + 1, mark.column + 1 + offset, self.source)

    def mark_of(self, container, key):
        marks = getattr(container, "marks", None)
        if marks is None:
            return getattr(container, "mark", None)
        if isinstance(container, list):
            return marks[key] if key < len(marks) else container.mark
        return marks.get(key, container.mark)

    def get(self, d, key, path, required=True, default=None):
        if not isinstance(d, dict):
            self.fail(f"{path}: expected a mapping", getattr(d, "mark", None))
        if key not in d:
            if required:
                self.fail(f"{path}.{key}: required key is missing", d.mark)
            return default
        return d[key]

    def expr(self, container, key, path) -> Expression:
        value = container[key]
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            self.fail(f"{path}: expected an expression string", self.mark_of(container, key))
        try:
            return Expression(value)
        except ExpressionError as exc:
            mark = self.mark_of(container, key)
            quoted = 1 if isinstance(value, str) and mark is not None and _is_quoted(mark) else 0
            self.fail(f"{path}: {exc}", mark, (exc.offset or 0) + quoted)

    def number(self, container, key, path, kind=float):
        value = container[key]
        if isinstance(value, bool):
            self.fail(f"{path}: expected a number", self.mark_of(container, key))
        try:
            out = kind(value)
        except (TypeError, ValueError):
            self.fail(f"{path}: expected {'an integer' if kind is int else 'a number'}",
                      self.mark_of(container, key))
        if kind is int and float(value) != out:
            self.fail(f"{path}: expected an integer", self.mark_of(container, key))
        return out


def _is_quoted(mark) -> bool:
    buf = mark.buffer
    return buf is not None and mark.pointer < len(buf) and buf[mark.pointer] in "\"'"


# ---------------------------------------------------------------------------
# configuration objects


@dataclass
class FitOptions:
    method: str = "kkt"
    p_range: tuple = (2, 10)
    n_sim: int = 0
    n_bc: int | None = None
    seed: int = DEFAULT_SEED
    sampler: str = "mc"       # virtual points
    design: str = "lhs"       # experimental design
    n_iter: int = 20
    tol: float = 1e-10
    data: str | None = None   # CSV of training data; otherwise generated from the reference

    @property
    def p_values(self) -> list[int]:
        lo, hi = self.p_range
        return list(range(lo, hi + 1))


@dataclass
class BenchOptions:
    methods: tuple = METHODS
    n_sim_grid: tuple = ()
    trials: int = 20
    p_range: tuple | None = None   # defaults to fit.p_range


@dataclass
class ProblemConfig:
    problem: ProblemSpec
    fit: FitOptions = field(default_factory=FitOptions)
    bench: BenchOptions = field(default_factory=BenchOptions)
    output: dict = field(default_factory=dict)
    source: str | None = field(default=None, compare=False)

    @property
    def name(self) -> str:
        return self.problem.name


def _parse_variables(ctx, raw):
    if not isinstance(raw, list) or not raw:
        ctx.fail("variables: expected a non-empty list", getattr(raw, "mark", None))
    out = []
    for i, v in enumerate(raw):
        path = f"variables[{i}]"
        name = ctx.get(v, "name", path)
        if not isinstance(name, str) or not name.isidentifier():
            ctx.fail(f"{path}.name: expected an identifier", ctx.mark_of(v, "name"))
        role = ctx.get(v, "role", path, required=False, default=DETERMINISTIC)
        if role not in (DETERMINISTIC, RANDOM):
            ctx.fail(f"{path}.role: expected 'deterministic' or 'random'", ctx.mark_of(v, "role"))
        bounds = ctx.get(v, "bounds", path)
        if not isinstance(bounds, list) or len(bounds) != 2:
            ctx.fail(f"{path}.bounds: expected [lower, upper]", ctx.mark_of(v, "bounds"))
        lo = ctx.number(bounds, 0, f"{path}.bounds[0]")
        hi = ctx.number(bounds, 1, f"{path}.bounds[1]")
        if not lo < hi:
            ctx.fail(f"{path}.bounds: lower bound must be below upper bound", ctx.mark_of(v, "bounds"))
        out.append(VariableTransform(name, role, lo, hi))
    return out


def _parse_orders(ctx, container, key, path):
    raw = container.get(key) or {}
    if not isinstance(raw, dict):
        ctx.fail(f"{path}: expected a mapping variable -> derivative order", ctx.mark_of(container, key))
    out = {}
    for n in raw:
        k = ctx.number(raw, n, f"{path}.{n}", int)
        if k < 0:
            ctx.fail(f"{path}.{n}: derivative order must be non-negative", ctx.mark_of(raw, n))
        out[str(n)] = k
    return out


def _parse_terms(ctx, container, path):
    if "terms" in container:
        raw = container["terms"]
        if not isinstance(raw, list) or not raw:
            ctx.fail(f"{path}.terms: expected a non-empty list", ctx.mark_of(container, "terms"))
        terms = []
        for i, t in enumerate(raw):
            tp = f"{path}.terms[{i}]"
            if not isinstance(t, dict):
                ctx.fail(f"{tp}: expected a mapping", ctx.mark_of(raw, i))
            coeff = ctx.expr(t, "coeff", f"{tp}.coeff") if "coeff" in t else Expression("1")
            terms.append(OperatorTerm.make(coeff, _parse_orders(ctx, t, "orders", f"{tp}.orders")))
        return terms
    # single-term shorthand; no orders means a Dirichlet condition
    coeff = ctx.expr(container, "coeff", f"{path}.coeff") if "coeff" in container else Expression("1")
    return [OperatorTerm.make(coeff, _parse_orders(ctx, container, "orders", f"{path}.orders"))]


def _parse_operator(ctx, raw, path):
    if not isinstance(raw, dict):
        ctx.fail(f"{path}: expected a mapping", getattr(raw, "mark", None))
    terms = _parse_terms(ctx, raw, path)
    ctx.get(raw, "rhs", path)
    return LinearOperator.make(terms, ctx.expr(raw, "rhs", f"{path}.rhs"))


def _check_names(ctx, op, raw, path, declared):
    # undeclared identifiers, reported at the expression that uses them
    items = [("rhs", op.rhs, raw)]
    term_src = raw.get("terms") if isinstance(raw, dict) else None
    for i, t in enumerate(op.terms):
        src = term_src[i] if term_src is not None else raw
        items.append((f"terms[{i}].coeff" if term_src is not None else "coeff", t.coeff, src))
        for n, _ in t.orders:
            if n not in declared:
                orders = src.get("orders", {})
                ctx.fail(f"{path}: derivative with respect to undeclared variable {n!r}",
                         ctx.mark_of(orders, n))
    for label, e, src in items:
        unknown = sorted(e.names - declared)
        if unknown:
            key = label.split(".")[-1]
            mark = ctx.mark_of(src, key if key in src else "rhs")
            shift = e.offset_of(unknown[0]) or 0
            if mark is not None and _is_quoted(mark):
                shift += 1
            ctx.fail(f"{path}.{label}: undeclared identifier {unknown[0]!r}", mark, shift)


def _parse_p_range(ctx, raw, path):
    if isinstance(raw, list):
        if len(raw) != 2:
            ctx.fail(f"{path}: expected [p_min, p_max] or an integer", raw.mark)
        lo = ctx.number(raw, 0, f"{path}[0]", int)
        hi = ctx.number(raw, 1, f"{path}[1]", int)
    else:
        lo = hi = ctx.number({"p": raw}, "p", path, int)
    if lo < 0 or hi < lo:
        ctx.fail(f"{path}: need 0 <= p_min <= p_max", getattr(raw, "mark", None))
    return (lo, hi)


def _parse_fit(ctx, raw):
    opts = FitOptions()
    if raw is None:
        return opts
    if not isinstance(raw, dict):
        ctx.fail("fit: expected a mapping", getattr(raw, "mark", None))
    known = {f.name for f in fields(FitOptions)} | {"n_BC"}
    for key in raw:
        if key not in known:
            ctx.fail(f"fit.{key}: unknown option", ctx.mark_of(raw, key))
    if "method" in raw:
        if raw["method"] not in METHODS:
            ctx.fail(f"fit.method: expected one of {list(METHODS)}", ctx.mark_of(raw, "method"))
        opts.method = raw["method"]
    if "p_range" in raw:
        opts.p_range = _parse_p_range(ctx, raw["p_range"], "fit.p_range")
    for key, attr in (("n_sim", "n_sim"), ("n_BC", "n_bc"), ("n_bc", "n_bc"), ("seed", "seed"),
                      ("n_iter", "n_iter")):
        if key in raw and raw[key] is not None:
            val = ctx.number(raw, key, f"fit.{key}", int)
            if val < (1 if key == "n_iter" else 0):
                ctx.fail(f"fit.{key}: out of range", ctx.mark_of(raw, key))
            setattr(opts, attr, val)
    if "tol" in raw:
        opts.tol = _parse_float(ctx, raw, "tol", "fit.tol")
    for key in ("sampler", "design"):
        if key in raw:
            if raw[key] not in ("lhs", "mc"):
                ctx.fail(f"fit.{key}: expected 'lhs' or 'mc'", ctx.mark_of(raw, key))
            setattr(opts, key, raw[key])
    if "data" in raw and raw["data"] is not None:
        opts.data = str(raw["data"])
    return opts


def _parse_float(ctx, raw, key, path):
    value = raw[key]
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", ".inf", "infinity"):
        return math.inf
    return ctx.number(raw, key, path)


def _parse_bench(ctx, raw):
    opts = BenchOptions()
    if raw is None:
        return opts
    if not isinstance(raw, dict):
        ctx.fail("bench: expected a mapping", getattr(raw, "mark", None))
    for key in raw:
        if key not in ("methods", "n_sim_grid", "trials", "p_range"):
            ctx.fail(f"bench.{key}: unknown option", ctx.mark_of(raw, key))
    if "methods" in raw:
        ms = raw["methods"]
        if not isinstance(ms, list) or not ms or any(m not in METHODS for m in ms):
            ctx.fail(f"bench.methods: expected a list drawn from {list(METHODS)}", ctx.mark_of(raw, "methods"))
        opts.methods = tuple(ms)
    if "n_sim_grid" in raw:
        g = raw["n_sim_grid"]
        if not isinstance(g, list) or not g:
            ctx.fail("bench.n_sim_grid: expected a non-empty list", ctx.mark_of(raw, "n_sim_grid"))
        opts.n_sim_grid = tuple(ctx.number(g, i, f"bench.n_sim_grid[{i}]", int) for i in range(len(g)))
    if "p_range" in raw:
        opts.p_range = _parse_p_range(ctx, raw["p_range"], "bench.p_range")
    if "trials" in raw:
        opts.trials = ctx.number(raw, "trials", "bench.trials", int)
        if opts.trials < 1:
            ctx.fail("bench.trials: must be at least 1", ctx.mark_of(raw, "trials"))
    return opts


_TOP = ("name", "variables", "pde", "bc", "reference", "fit", "bench", "output", "linearization")


def parse_config(text: str, source: str | None = None) -> ProblemConfig:
    ctx = _Ctx(source)
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"invalid YAML: {exc.problem}", mark.line + 1 if mark else None,
                          mark.column + 1 if mark else None, source) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", source=source) from None
    if not isinstance(raw, dict):
        ctx.fail("expected a mapping at the top level")
    for key in raw:
        if key not in _TOP:
            ctx.fail(f"{key}: unknown section", ctx.mark_of(raw, key))

    name = str(raw.get("name", "problem"))
    variables = _parse_variables(ctx, ctx.get(raw, "variables", "config"))
    declared = {v.name for v in variables}
    for_expr = declared | {"u_prev"}

    pde_raw = ctx.get(raw, "pde", "config")
    pde = _parse_operator(ctx, pde_raw, "pde")
    _check_names(ctx, pde, pde_raw, "pde", for_expr)

    bcs = []
    bc_raw = raw.get("bc") or []
    if not isinstance(bc_raw, list):
        ctx.fail("bc: expected a list", ctx.mark_of(raw, "bc"))
    for i, b in enumerate(bc_raw):
        path = f"bc[{i}]"
        op = _parse_operator(ctx, b, path)
        _check_names(ctx, op, b, path, for_expr)
        loc = ctx.get(b, "location", path)
        if not isinstance(loc, dict) or not loc:
            ctx.fail(f"{path}.location: expected a mapping variable -> value", ctx.mark_of(b, "location"))
        for n in loc:
            if n not in declared:
                ctx.fail(f"{path}.location: undeclared variable {n!r}", ctx.mark_of(loc, n))
        location = {str(n): ctx.number(loc, n, f"{path}.location.{n}") for n in loc}
        bcs.append(BoundaryCondition.make(op, location))

    reference = None
    ref_raw = raw.get("reference")
    if ref_raw is not None:
        if not isinstance(ref_raw, dict):
            ctx.fail("reference: expected a mapping with key 'solution'", ctx.mark_of(raw, "reference"))
        ctx.get(ref_raw, "solution", "reference")
        reference = ctx.expr(ref_raw, "solution", "reference.solution")
        unknown = sorted(reference.names - declared)
        if unknown:
            ctx.fail(f"reference.solution: undeclared identifier {unknown[0]!r}",
                     ctx.mark_of(ref_raw, "solution"))

    lin = raw.get("linearization", "coefficient")
    if lin not in LINEARIZATIONS:
        ctx.fail(f"linearization: expected one of {list(LINEARIZATIONS)}", ctx.mark_of(raw, "linearization"))

    try:
        problem = ProblemSpec(variables, pde, bcs, reference, name, lin)
    except ProblemError as exc:
        ctx.fail(str(exc), raw.mark)
    fit_opts = _parse_fit(ctx, raw.get("fit"))
    bench_opts = _parse_bench(ctx, raw.get("bench"))
    output = dict(raw.get("output") or {})
    return ProblemConfig(problem, fit_opts, bench_opts, {str(k): str(v) for k, v in output.items()}, source)


def load_config(path) -> ProblemConfig:
    path = os.fspath(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=path)


# ---------------------------------------------------------------------------
# canonical printing


def _operator_dict(op: LinearOperator) -> dict:
    return {
        "terms": [{"coeff": t.coeff.text, "orders": dict(t.orders)} for t in op.terms],
        "rhs": op.rhs.text,
    }


def problem_to_dict(problem: ProblemSpec) -> dict:
    out = {
        "name": problem.name,
        "variables": [
            {"name": v.name, "role": v.kind, "bounds": [float(v.lower), float(v.upper)]}
            for v in problem.variables
        ],
        "pde": _operator_dict(problem.pde),
        "bc": [{"location": dict(bc.location), **_operator_dict(bc.operator)} for bc in problem.bcs],
    }
    if problem.reference is not None:
        out["reference"] = {"solution": problem.reference.text}
    if problem.linearization != "coefficient":
        out["linearization"] = problem.linearization
    return out


def config_to_dict(cfg: ProblemConfig) -> dict:
    out = problem_to_dict(cfg.problem)
    f = cfg.fit
    fit = {
        "method": f.method,
        "p_range": list(f.p_range),
        "n_sim": f.n_sim,
        "seed": f.seed,
        "sampler": f.sampler,
        "design": f.design,
        "n_iter": f.n_iter,
        "tol": "inf" if math.isinf(f.tol) else f.tol,
    }
    if f.n_bc is not None:
        fit["n_BC"] = f.n_bc
    if f.data is not None:
        fit["data"] = f.data
    out["fit"] = fit
    b = cfg.bench
    bench = {"methods": list(b.methods), "trials": b.trials}
    if b.n_sim_grid:
        bench["n_sim_grid"] = list(b.n_sim_grid)
    if b.p_range is not None:
        bench["p_range"] = list(b.p_range)
    out["bench"] = bench
    if cfg.output:
        out["output"] = dict(cfg.output)
    return out


def dump_config(cfg: ProblemConfig) -> str:
    """Canonical YAML text; parsing it gives back an equal configuration."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None, width=100)


def problem_from_dict(d: dict) -> ProblemSpec:
    return parse_config(yaml.safe_dump(d, sort_keys=False)).problem


# ---------------------------------------------------------------------------
# model files


def atomic_write(path, data: str | bytes):
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def model_to_json(model: Pc2Model, problem: ProblemSpec | None = None, report: dict | None = None) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "variables": [
            {"name": t.name, "role": t.kind, "bounds": [float(t.lower).hex(), float(t.upper).hex()]}
            for t in model.transforms
        ],
        "basis": {"M": model.basis.M, "p": model.basis.p, "indices": model.basis.as_tuples()},
        "coefficients": [float(c).hex() for c in model.coefficients],
        "metadata": _json_safe(model.metadata),
    }
    if problem is not None:
        doc["problem"] = problem_to_dict(problem)
    if report is not None:
        doc["report"] = _json_safe(report)
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def save_model(path, model: Pc2Model, problem: ProblemSpec | None = None, report: dict | None = None):
    atomic_write(path, model_to_json(model, problem, report))


def model_from_json(text: str, source: str | None = None):
    """Returns (model, problem or None)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not a model file: {exc.msg}", exc.lineno, exc.colno, source) from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ConfigError("not a model file (missing format marker)", source=source)
    if doc.get("version") != MODEL_VERSION:
        raise ConfigError(f"unsupported model file version {doc.get('version')!r}", source=source)
    try:
        transforms = [
            VariableTransform(v["name"], v["role"], float.fromhex(v["bounds"][0]), float.fromhex(v["bounds"][1]))
            for v in doc["variables"]
        ]
        b = doc["basis"]
        basis = BasisSet(int(b["M"]), int(b["p"]), tuple(tuple(int(a) for a in row) for row in b["indices"]))
        beta = np.array([float.fromhex(c) for c in doc["coefficients"]])
        model = Pc2Model(basis, beta, transforms, doc.get("metadata", {}))
        problem = problem_from_dict(doc["problem"]) if "problem" in doc else None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed model file: {exc}", source=source) from None
    return model, problem


def load_model(path):
    path = os.fspath(path)
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read(), source=path)


def with_overrides(cfg: ProblemConfig, **fit_overrides) -> ProblemConfig:
    kw = {k: v for k, v in fit_overrides.items() if v is not None}
    return replace(cfg, fit=replace(cfg.fit, **kw)) if kw else cfg
