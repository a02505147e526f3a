"""``hopflax`` command line: value, grid, arc and check subcommands.

Exit codes: 0 ok, 1 a check failed, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import itertools
import json
import sys

import numpy as np
from pydantic import ValidationError

from . import analysis, checks
from .config import load_config
from .errors import DomainError, NonConvergence, NonFinite
from .hopf import hopf_lax_value, optimal_arc

EXIT_OK, EXIT_CHECK_FAILED, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _floats(text, name):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None


def _vector(text, dim, name):
    vals = _floats(text, name)
    if len(vals) == 1 and dim > 1:
        vals = vals * dim
    if len(vals) != dim:
        raise UsageError(f"--{name} needs {dim} components, got {len(vals)}")
    return np.array(vals)


def _fmt(value):
    value = float(value)
    if np.isnan(value):
        return "nan"
    return repr(value)


def _columns(base, dim):
    return [base] if dim == 1 else [f"{base}{i + 1}" for i in range(dim)]


def _meta_line(payload):
    return "# " + json.dumps(payload, sort_keys=True)


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def cmd_value(args, cfg, spec):
    x = _vector(args.x, spec.dim, "x")
    sol = hopf_lax_value(spec, x, args.t)
    report = {**sol.to_dict(), "x": x.tolist(), "t": args.t, "config": cfg.resolved()}
    with _output(args.out) as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _axis_grid(args, dim):
    lo = _vector(args.x_min, dim, "x-min")
    hi = _vector(args.x_max, dim, "x-max")
    axes = [np.linspace(a, b, args.x_count) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)))


def cmd_grid(args, cfg, spec):
    if args.x_count < 1 or args.t_count < 1:
        raise UsageError("grid counts must be positive")
    xs = _axis_grid(args, spec.dim)
    ts = np.linspace(args.t_min, args.t_max, args.t_count)
    grid = analysis.grid_eval(spec, xs, ts, residuals=True)
    n = spec.dim
    header = _columns("x", n) + ["t", "v"] + _columns("alpha", n) + _columns("v_x", n) + ["v_t", "dp_residual"]
    with_diss = args.residuals and grid.dissipation_residual is not None
    if with_diss:
        header.append("dissipation_residual")
    with _output(args.out) as fh:
        fh.write(_meta_line({"config": cfg.resolved(), "errors": [list(e) for e in grid.errors]}) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for rec in grid.records():
            row = list(rec["x"]) + [rec["t"], rec["v"]] + list(rec["alpha"]) + list(rec["v_x"])
            row += [rec["v_t"], rec["dp_residual"]]
            if with_diss:
                row.append(rec["dissipation_residual"])
            writer.writerow([_fmt(v) for v in row])
    return EXIT_OK


def cmd_arc(args, cfg, spec):
    x = _vector(args.x, spec.dim, "x")
    arc = optimal_arc(spec, x, args.t, samples=args.samples)
    n = spec.dim
    meta = {"config": cfg.resolved(), "cost": arc.cost, "v": arc.v, "alpha": arc.alpha.tolist()}
    with _output(args.out) as fh:
        fh.write(_meta_line(meta) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s"] + _columns("y", n) + _columns("u", n))
        for s, y, u in zip(arc.times, arc.positions, arc.velocities):
            writer.writerow([_fmt(s)] + [_fmt(v) for v in y] + [_fmt(v) for v in u])
    return EXIT_OK


def cmd_check(args, cfg, spec):
    results = checks.run_suite(args.suite, spec)
    passed = all(c.passed for c in results)
    report = {
        "suite": args.suite,
        "passed": passed,
        "criteria": [c.to_dict() for c in results],
        "config": cfg.resolved(),
    }
    for c in results:
        print(c.line(), file=sys.stderr)
    with _output(args.out) as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def build_parser():
    parser = argparse.ArgumentParser(prog="hopflax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="problem JSON file")
        p.add_argument("--out", default="-", help="output path (default stdout)")

    p = sub.add_parser("value", help="value, minimizer and diagnostics at one point")
    common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--t", type=float, required=True)
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("grid", help="space-time table as CSV")
    common(p)
    p.add_argument("--x-min", required=True)
    p.add_argument("--x-max", required=True)
    p.add_argument("--x-count", type=int, required=True)
    p.add_argument("--t-min", type=float, required=True)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--t-count", type=int, required=True)
    p.add_argument("--residuals", action="store_true", help="add the dissipation residual column")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("arc", help="sampled optimal arc as CSV")
    common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--samples", type=int, default=101)
    p.set_defaults(func=cmd_arc)

    p = sub.add_parser("check", help="run a verification suite")
    common(p)
    p.add_argument("--suite", required=True, choices=sorted(checks.SUITES))
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        spec = cfg.to_spec()
        return args.func(args, cfg, spec)
    except (ValidationError, DomainError, UsageError, OSError, json.JSONDecodeError) as exc:
        print(f"hopflax: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NonConvergence, NonFinite) as exc:
        print(f"hopflax: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
