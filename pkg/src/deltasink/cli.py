"""Command-line entry point: ``deltasink {origin,field,validate,converge}``.

Configuration is a YAML file::

    diffusion_coefficient: 1.0
    sink: {type: constant, k0: 1.0}
    ic: {type: delta, x0: -1.0}
    grid: {t_max: 4.0, n_steps: 4096, half_width: 12.0, n_points: 2401}
    method: volterra            # volterra | laplace | analytic | fdoracle
    fd: {dx: 0.005, dt: 1.0e-4}
    laplace: {algorithm: talbot, accuracy: 1.0e-8}
    validate: {times: [1.0], origin_t_min: 0.01, laplace_t_min: 1.0}
    converge: {ladder: [512, 1024, 2048, 4096], t_min: 0.01}
    tolerances: {origin: 1.0e-3, field: 1.0e-2, balance: 1.0e-5, fd_balance: 5.0e-3}

Exit codes: 0 success, 1 unexpected failure, 2 unreadable or malformed
config, 3 invalid problem or incompatible request, 4 accuracy or tolerance
failure, 5 spatial window too small.
"""

from __future__ import annotations

import argparse
import copy
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
import yaml

from . import analytic, fdoracle, field, laplace, volterra
from .errors import (
    AccuracyError,
    ConvergenceError,
    DomainError,
    NumericalBreakdownError,
    TruncationError,
    TruncationWarning,
    UnsupportedQueryError,
    ValidationError,
)
from .model import (
    ConstantSink,
    DeltaAt,
    ExponentialSink,
    Gaussian,
    InverseTimeSink,
    LinearSink,
    Problem,
    SpaceGrid,
    TabulatedIC,
    TabulatedSink,
    TimeGrid,
    ZeroSink,
    problem_issues,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_ACCURACY = 4
EXIT_TRUNCATION = 5

METHODS = ("volterra", "laplace", "analytic", "fdoracle")

DEFAULT_TOLERANCES = {"origin": 1e-3, "field": 1e-2, "balance": 1e-5, "fd_balance": 5e-3}


class ConfigError(Exception):
    """The config file cannot be read or does not follow the schema."""


# --------------------------------------------------------------------------
# config <-> problem
# --------------------------------------------------------------------------

_SINKS = {
    "zero": (ZeroSink, ()),
    "constant": (ConstantSink, ("k0",)),
    "linear": (LinearSink, ("alpha",)),
    "inverse_time": (InverseTimeSink, ("alpha",)),
    "exponential": (ExponentialSink, ("beta", "decay")),
    "tabulated": (TabulatedSink, ("times", "rates")),
}
_ICS = {
    "delta": (DeltaAt, ("x0",)),
    "gaussian": (Gaussian, ("center", "width")),
    "tabulated": (TabulatedIC, ("x", "density")),
}


def _build(table, block, what):
    if not isinstance(block, dict) or "type" not in block:
        raise ConfigError(f"'{what}' must be a mapping with a 'type' key")
    kind = block["type"]
    if kind not in table:
        raise ConfigError(f"unknown {what} type {kind!r}; expected one of {sorted(table)}")
    cls, keys = table[kind]
    extra = set(block) - set(keys) - {"type"}
    if extra:
        raise ConfigError(f"unexpected {what} keys {sorted(extra)}")
    try:
        args = [block[k] for k in keys]
    except KeyError as exc:
        raise ConfigError(f"{what} of type {kind!r} needs key {exc.args[0]!r}") from None
    for k, v in zip(keys, args):
        ok = isinstance(v, list) if k in ("times", "rates", "x", "density") else _is_number(v)
        if not ok:
            raise ConfigError(f"{what}.{k} has the wrong type: {v!r}")
    return cls(*[tuple(a) if isinstance(a, list) else float(a) for a in args])


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _dump_params(obj, keys):
    out = {"type": obj.kind}
    for k in keys:
        v = getattr(obj, k)
        out[k] = list(v) if isinstance(v, tuple) else float(v)
    return out


@dataclass
class RunConfig:
    """Parsed config; :meth:`problem` builds the physical problem."""

    diffusion_coefficient: float
    sink: dict
    ic: dict
    grid: dict
    method: str = "volterra"
    fd: dict = dc_field(default_factory=dict)
    laplace: dict = dc_field(default_factory=dict)
    validate: dict = dc_field(default_factory=dict)
    converge: dict = dc_field(default_factory=dict)
    tolerances: dict = dc_field(default_factory=dict)
    output: dict = dc_field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        for key in ("diffusion_coefficient", "sink", "ic", "grid"):
            if key not in d:
                raise ConfigError(f"missing config key {key!r}")
        if not _is_number(d["diffusion_coefficient"]):
            raise ConfigError("diffusion_coefficient must be a number")
        grid = d["grid"]
        if not isinstance(grid, dict) or not {"t_max", "n_steps"} <= set(grid):
            raise ConfigError("grid needs t_max and n_steps")
        method = d.get("method", "volterra")
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; expected one of {list(METHODS)}")
        cfg = cls(**{k: copy.deepcopy(v) for k, v in d.items()})
        cfg.problem()  # parse errors surface here; validity is checked separately
        return cfg

    @classmethod
    def from_problem(cls, p, grid, method="volterra", **blocks):
        sink_cls, sink_keys = _SINKS[p.sink.kind]
        ic_cls, ic_keys = _ICS[p.initial_condition.kind]
        return cls(
            float(p.diffusion_coefficient),
            _dump_params(p.sink, sink_keys),
            _dump_params(p.initial_condition, ic_keys),
            dict(grid),
            method,
            **blocks,
        )

    def to_dict(self):
        out = {
            "diffusion_coefficient": self.diffusion_coefficient,
            "sink": self.sink,
            "ic": self.ic,
            "grid": self.grid,
            "method": self.method,
        }
        for k in ("fd", "laplace", "validate", "converge", "tolerances", "output"):
            if getattr(self, k):
                out[k] = getattr(self, k)
        return copy.deepcopy(out)

    def problem(self):
        try:
            return Problem(
                float(self.diffusion_coefficient),
                _build(_SINKS, self.sink, "sink"),
                _build(_ICS, self.ic, "ic"),
            )
        except DomainError as exc:
            raise ConfigError(str(exc)) from None

    def time_grid(self):
        return TimeGrid(float(self.grid["t_max"]), self.grid["n_steps"])

    def space_grid(self):
        return SpaceGrid(float(self.grid.get("half_width", 12.0)), self.grid.get("n_points", 2401))

    def fd_config(self, t_max=None):
        dx = float(self.fd.get("dx", self.space_grid().dx))
        dt = float(self.fd.get("dt", self.time_grid().h))
        t_max = float(self.grid["t_max"]) if t_max is None else t_max
        return fdoracle.FdConfig.from_resolution(dx, dt, self.space_grid().half_width, t_max)

    def tol(self, key):
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from None
    return RunConfig.from_dict(data)


def _checked_problem(cfg):
    p = cfg.problem()
    issues = problem_issues(p)
    if issues:
        raise ValidationError(issues)
    return p


# --------------------------------------------------------------------------
# method runners
# --------------------------------------------------------------------------


def _laplace_spec(cfg, times):
    return laplace.InversionSpec(
        tuple(times),
        cfg.laplace.get("algorithm", "talbot"),
        float(cfg.laplace.get("accuracy", 1e-8)),
    )


def origin_series(cfg, p, method, times=None):
    """(t, P(0, t), f(t)) on the config time grid, or on ``times`` (grid nodes)."""
    tg = cfg.time_grid()
    idx = np.arange(tg.n_steps + 1) if times is None else np.array([tg.index_of(t) for t in times])
    t = tg.nodes[idx]
    f = np.asarray(volterra.free_origin_forcing(p, t), dtype=float)
    if method == "volterra":
        P = volterra.solve_origin(p, tg).values[idx]
    elif method == "analytic":
        P = np.empty(t.size)
        pos = t > 0
        P[~pos] = f[~pos]
        vals = analytic.closed_form(p, 0.0, t[pos]) if np.any(pos) else np.empty(0)
        if vals is None:
            raise UnsupportedQueryError(f"no closed form for the {p.sink.kind} sink with this initial condition")
        P[pos] = vals
    elif method == "laplace":
        P = np.empty(t.size)
        pos = t > 0
        P[~pos] = f[~pos]
        if np.any(pos):
            ev = laplace.transform_evaluator(p)
            P[pos] = laplace.invert(ev, _laplace_spec(cfg, t[pos])).values
    elif method == "fdoracle":
        hist = fdoracle.cn_solve(p, cfg.fd_config(), save_times=[])
        fd_t = hist.step_times
        P = np.interp(t, fd_t, hist.origin)
    else:
        raise DomainError(f"unknown method {method!r}")
    return t, P, f


def field_snapshots(cfg, p, method, times):
    sg = cfg.space_grid()
    tg = cfg.time_grid()
    for t in times:
        tg.index_of(t)
    if method == "volterra":
        oh = volterra.solve_origin(p, tg)
        return [field.snapshot(p, oh, sg, t) for t in times]
    if method == "analytic":
        out = []
        for t in times:
            v = analytic.closed_form(p, sg.nodes, t)
            if v is None:
                raise UnsupportedQueryError(f"no closed form for the {p.sink.kind} sink with this initial condition")
            out.append(field.FieldSnapshot(sg, float(t), v))
        return out
    if method == "fdoracle":
        hist = fdoracle.cn_solve(p, cfg.fd_config(t_max=max(times)), save_times=times)
        return [hist.snapshot(t) for t in times]
    raise UnsupportedQueryError(f"method {method!r} does not produce spatial fields")


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(v):
    return format(float(v), ".17g")


def write_csv(rows, header, out):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _parse_times(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--times must be a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise ConfigError("--times is empty")
    return vals


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_origin(cfg, args):
    p = _checked_problem(cfg)
    times = _parse_times(args.times) if args.times else None
    t, P, f = origin_series(cfg, p, args.method or cfg.method, times)
    write_csv(zip(t, P, f), ["t", "origin_density", "free_forcing"], args.out)
    return EXIT_OK


def cmd_field(cfg, args):
    p = _checked_problem(cfg)
    times = _parse_times(args.times) if args.times else [float(cfg.grid["t_max"])]
    snaps = field_snapshots(cfg, p, args.method or cfg.method, times)
    rows = ((s.time, x, v) for s in snaps for x, v in zip(s.x, s.values))
    write_csv(rows, ["t", "x", "density"], args.out)
    return EXIT_OK


def applicable_methods(p):
    methods = ["volterra"]
    if analytic.closed_form(p, 0.0, 1.0) is not None:
        methods.append("analytic")
    if isinstance(p.sink, (ZeroSink, ConstantSink, LinearSink)) or (
        isinstance(p.sink, ExponentialSink) and p.sink.decay > 0
    ):
        methods.append("laplace")
    methods.append("fdoracle")
    return methods


def _check_times(cfg, tg):
    times = cfg.validate.get("times")
    if times is None:
        times = [tg.nodes[tg.index_of(min(1.0, tg.t_max))]] if tg.t_max >= 1.0 else [tg.t_max]
    return [float(t) for t in times]


def _rel_err(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / scale))


def run_validation(cfg):
    """Cross-check every applicable method; returns (report dict, passed)."""
    p = _checked_problem(cfg)
    tg = cfg.time_grid()
    sg = cfg.space_grid()
    times = _check_times(cfg, tg)
    t_min = float(cfg.validate.get("origin_t_min", 0.01))
    report = {"problem": cfg.to_dict(), "methods": {}, "origin": {}, "field": {}, "balance": {}, "checks": []}
    origin_idx = np.flatnonzero(tg.nodes >= t_min)
    # laplace inversion is costly per time and loses relative accuracy where
    # P(0, t) is exponentially small, so it is sampled on later times only
    lap_min = float(cfg.validate.get("laplace_t_min", 0.25 * tg.t_max))
    lap_idx = np.flatnonzero(tg.nodes >= lap_min)
    sample = lap_idx[np.unique(np.linspace(0, lap_idx.size - 1, 8).round().astype(int))]
    origins, fields = {}, {}
    for m in applicable_methods(p):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TruncationWarning)
                if m == "volterra":
                    oh = volterra.solve_origin(p, tg)
                    origins[m] = (tg.nodes, oh.values)
                    fields[m] = [field.snapshot(p, oh, sg, t) for t in times]
                    bal = field.balance(p, oh, sg)
                    report["balance"]["volterra"] = bal.max_residual
                elif m == "analytic":
                    t = tg.nodes[origin_idx]
                    origins[m] = (t, analytic.closed_form(p, 0.0, t))
                    fields[m] = field_snapshots(cfg, p, m, times)
                elif m == "laplace":
                    t = tg.nodes[sample]
                    origins[m] = (t, origin_series(cfg, p, m, t)[1])
                elif m == "fdoracle":
                    hist = fdoracle.cn_solve(p, cfg.fd_config(t_max=max(times)), save_times=times)
                    fields[m] = [hist.snapshot(t) for t in times]
                    report["balance"]["fdoracle"] = float(np.max(hist.balance_residual))
            report["methods"][m] = {"status": "ok"}
        except Exception as exc:  # recorded, the report goes on
            report["methods"][m] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    ref_t, ref_v = origins.get("volterra", (None, None))
    for m, (t, v) in origins.items():
        if m == "volterra" or ref_t is None:
            continue
        sel = np.isin(np.round(ref_t / tg.h).astype(int), np.round(t / tg.h).astype(int))
        err = _rel_err(ref_v[sel], v)
        report["origin"][f"volterra-{m}"] = err
        report["checks"].append({"name": f"origin volterra-{m}", "value": err, "tolerance": cfg.tol("origin"), "pass": err <= cfg.tol("origin")})
    names = sorted(fields)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            rep = fdoracle.compare(fields[a], fields[b])
            report["field"][f"{a}-{b}"] = rep.max_rel_linf
            report["checks"].append({"name": f"field {a}-{b}", "value": rep.max_rel_linf, "tolerance": cfg.tol("field"), "pass": rep.max_rel_linf <= cfg.tol("field")})
    for m, key in (("volterra", "balance"), ("fdoracle", "fd_balance")):
        if m in report["balance"]:
            v = report["balance"][m]
            report["checks"].append({"name": f"balance {m}", "value": v, "tolerance": cfg.tol(key), "pass": v <= cfg.tol(key)})
    failed_methods = [m for m, r in report["methods"].items() if r["status"] != "ok"]
    passed = all(c["pass"] for c in report["checks"]) and not failed_methods
    report["passed"] = passed
    return report, passed


def cmd_validate(cfg, args):
    report, passed = run_validation(cfg)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    elif not args.quiet:
        sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_ACCURACY


def convergence_table(cfg, ladder=None):
    """Rows (n_steps, max_error, order) for a refinement ladder."""
    p = _checked_problem(cfg)
    ladder = [int(n) for n in (ladder or cfg.converge.get("ladder", [512, 1024, 2048, 4096]))]
    if len(ladder) < 3:
        raise DomainError("a convergence ladder needs at least 3 levels")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise DomainError("ladder levels must increase")
    t_max = float(cfg.grid["t_max"])
    t_min = float(cfg.converge.get("t_min", 0.01))
    runs = [volterra.solve_origin(p, TimeGrid(t_max, n)) for n in ladder]
    coarse = runs[0].grid.nodes
    keep = coarse >= t_min
    tc = coarse[keep]

    def at_coarse(oh):
        stride = oh.grid.n_steps // ladder[0]
        return oh.values[::stride][keep]

    exact = analytic.closed_form(p, 0.0, tc)
    if exact is not None:
        errs = [_rel_err(at_coarse(oh), exact) for oh in runs]
        levels = ladder
    else:
        # self-reference: each level against the next finer one
        errs = [_rel_err(at_coarse(a), at_coarse(b)) for a, b in zip(runs, runs[1:])]
        levels = ladder[:-1]
    rows = []
    for i, (n, e) in enumerate(zip(levels, errs)):
        order = math.nan
        if i > 0 and errs[i - 1] > 0 and e > 0:
            order = math.log(errs[i - 1] / e, ladder[i] / ladder[i - 1])
        rows.append((n, e, order))
    return rows


def cmd_converge(cfg, args):
    ladder = [int(v) for v in _parse_times(args.ladder)] if args.ladder else None
    rows = convergence_table(cfg, ladder)
    write_csv(rows, ["n_steps", "max_error", "estimated_order"], args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="deltasink", description="Diffusion with a time-dependent point sink.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, metavar="PATH", help="YAML run configuration")
        sp.add_argument("--out", metavar="PATH", help="output file (default: standard output)")
        sp.add_argument("--quiet", action="store_true", help="suppress informational output")

    sp = sub.add_parser("origin", help="origin density P(0, t) as CSV")
    common(sp)
    sp.add_argument("--method", choices=METHODS)
    sp.add_argument("--times", metavar="LIST", help="comma-separated grid times (default: all nodes)")
    sp.set_defaults(func=cmd_origin)

    sp = sub.add_parser("field", help="P(x, t) at selected times as long-format CSV")
    common(sp)
    sp.add_argument("--method", choices=METHODS)
    sp.add_argument("--times", metavar="LIST", help="comma-separated grid times (default: t_max)")
    sp.set_defaults(func=cmd_field)

    sp = sub.add_parser("validate", help="cross-validate all applicable methods, JSON report")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("converge", help="refinement study of the origin solver")
    common(sp)
    sp.add_argument("--ladder", metavar="LIST", help="comma-separated n_steps levels")
    sp.set_defaults(func=cmd_converge)
    return parser


def _fail(code, message):
    sys.stderr.write(f"deltasink: {message}\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except ConfigError as exc:
        return _fail(EXIT_PARSE, f"config error: {exc}")
    except ValidationError as exc:
        for issue in exc.issues:
            sys.stderr.write(f"deltasink: {issue.code}: {issue.message}\n")
        return EXIT_VALIDATION
    except (DomainError, UnsupportedQueryError) as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except (AccuracyError, ConvergenceError, NumericalBreakdownError) as exc:
        return _fail(EXIT_ACCURACY, str(exc))
    except TruncationError as exc:
        return _fail(EXIT_TRUNCATION, str(exc))


if __name__ == "__main__":
    sys.exit(main())
