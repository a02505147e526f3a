"""Space-time sweeps and regularity diagnostics of the value function."""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import convex
from .discount import ExponentialRate, discount_eval
from .dpe import w_term
from .errors import DomainError, HopfLaxError, NonConvergence
from .hopf import _Flow, _check_time, _vec, arc_position, hopf_lax_value, objective
from .numerics import integrate


def describe_spec(spec):
    return {
        "dim": spec.dim,
        "horizon": spec.horizon,
        "lagrangian": spec.lagrangian.describe(),
        "terminal": spec.terminal.describe(),
        "discount": spec.discount.describe(),
        "quadrature": vars(spec.quad),
        "minimize": vars(spec.min_cfg),
        "finite_diff": vars(spec.fd_cfg),
        "terminal_eps": spec.terminal_eps,
    }


def spec_digest(spec):
    blob = json.dumps(describe_spec(spec), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def thread_count():
    try:
        return max(1, int(os.environ.get("HOPFLAX_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class GridResult:
    """Arrays are indexed ``[it, ix, ...]``; rows share a time."""

    x_grid: np.ndarray
    t_grid: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    v_x: np.ndarray | None = None
    v_t: np.ndarray | None = None
    dp_residual: np.ndarray | None = None
    dissipation_residual: np.ndarray | None = None
    errors: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.v.size

    def records(self):
        """Per-point dictionaries in row-major (time, then space) order."""
        for it, t in enumerate(self.t_grid):
            for ix, x in enumerate(self.x_grid):
                rec = {"x": x, "t": float(t), "v": float(self.v[it, ix]), "alpha": self.alpha[it, ix]}
                for name in ("v_x", "v_t", "dp_residual", "dissipation_residual"):
                    arr = getattr(self, name)
                    if arr is not None:
                        rec[name] = arr[it, ix]
                yield rec


def _as_points(spec, x_grid):
    pts = np.asarray(x_grid, dtype=float)
    if pts.ndim == 1 and spec.dim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != spec.dim:
        raise DomainError(f"x grid must have shape (k, {spec.dim})")
    return pts


def _point_derivatives(spec, x, t, warm):
    h = spec.fd_cfg.step
    T = spec.horizon

    def v_at(xx, tt):
        return hopf_lax_value(spec, xx, tt, warm_start=warm).v

    tp, tm = min(t + h, T), max(t - h, 0.0)
    v_t = (v_at(x, tp) - v_at(x, tm)) / (tp - tm)
    v_x = np.empty(spec.dim)
    for i in range(spec.dim):
        e = np.zeros(spec.dim)
        e[i] = h
        v_x[i] = (v_at(x + e, t) - v_at(x - e, t)) / (2 * h)
    return v_x, v_t


def _sweep_row(spec, xs, t, derivatives, residuals):
    n = spec.dim
    nx = len(xs)
    out = {
        "v": np.full(nx, np.nan),
        "alpha": np.full((nx, n), np.nan),
        "v_x": np.full((nx, n), np.nan),
        "v_t": np.full(nx, np.nan),
        "dp": np.full(nx, np.nan),
        "diss": np.full(nx, np.nan),
        "errors": [],
    }
    exponential = isinstance(spec.discount, ExponentialRate)
    warm = None
    for ix, x in enumerate(xs):
        try:
            sol = hopf_lax_value(spec, x, t, warm_start=warm)
            warm = sol.alpha
            out["v"][ix], out["alpha"][ix] = sol.v, sol.alpha
            if derivatives:
                v_x, v_t = _point_derivatives(spec, x, t, warm)
                out["v_x"][ix], out["v_t"][ix] = v_x, v_t
                if residuals and spec.horizon - t > spec.terminal_eps:
                    core = -v_t + float(convex.conjugate(spec.lagrangian, -v_x))
                    a = convex.iota(spec.lagrangian, -v_x)
                    out["dp"][ix] = core + w_term(spec, x, t, a)
                    if exponential:
                        out["diss"][ix] = core + float(spec.discount.rate(t)) * sol.v
        except HopfLaxError as exc:
            out["errors"].append((ix, f"{type(exc).__name__}: {exc}"))
    return out


def grid_eval(spec, x_grid, t_grid, derivatives=True, residuals=False, threads=None):
    """Evaluate the value function on a grid, warm-starting along each time row.

    Point failures are recorded in ``errors``; the sweep raises only when
    more than 10% of the points fail.
    """
    xs = _as_points(spec, x_grid)
    ts = np.asarray(t_grid, dtype=float)
    for t in ts:
        _check_time(spec, t)
    if residuals:
        derivatives = True
    started = time.perf_counter()
    workers = min(threads or thread_count(), max(1, len(ts)))
    args = [(spec, xs, float(t), derivatives, residuals) for t in ts]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda a: _sweep_row(*a), args))
    else:
        rows = [_sweep_row(*a) for a in args]

    errors = [(it, ix, msg) for it, row in enumerate(rows) for ix, msg in row["errors"]]
    total = len(ts) * len(xs)
    if len(errors) > 0.1 * total:
        raise NonConvergence(f"grid sweep failed at {len(errors)} of {total} points; first: {errors[0][2]}")
    stack = lambda key: np.stack([row[key] for row in rows])  # noqa: E731
    exponential = isinstance(spec.discount, ExponentialRate)
    return GridResult(
        x_grid=xs,
        t_grid=ts,
        v=stack("v"),
        alpha=stack("alpha"),
        v_x=stack("v_x") if derivatives else None,
        v_t=stack("v_t") if derivatives else None,
        dp_residual=stack("dp") if residuals else None,
        dissipation_residual=stack("diss") if residuals and exponential else None,
        errors=errors,
        metadata={"spec_digest": spec_digest(spec), "elapsed_s": time.perf_counter() - started},
    )


def lipschitz_estimate(grid):
    """Largest difference quotients of ``v`` between grid neighbours in x and in t."""
    if grid.v.shape[0] < 2 or grid.v.shape[1] < 2:
        raise DomainError("Lipschitz estimate needs at least two points per axis")
    dv_x = np.abs(np.diff(grid.v, axis=1))
    dx = np.linalg.norm(np.diff(grid.x_grid, axis=0), axis=1)
    dv_t = np.abs(np.diff(grid.v, axis=0))
    dt = np.diff(grid.t_grid)
    L_x = float(np.nanmax(dv_x / dx[None, :]))
    L_t = float(np.nanmax(dv_t / dt[:, None]))
    return L_x, L_t


def terminal_convergence(spec, x, t_sequence):
    """``(t, delta_t, |v - d_t(T) g(x)| / delta_t)`` along times approaching ``T``."""
    x = _vec(spec, x)
    ts = [float(t) for t in t_sequence]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise DomainError("time sequence must be increasing")
    gx = float(spec.terminal.value(x))
    out = []
    for t in ts:
        t = _check_time(spec, t, allow_terminal=False)
        delta = integrate(lambda s: discount_eval(spec.discount, t, s), t, spec.horizon, spec.quad)
        v = hopf_lax_value(spec, x, t).v
        dT = discount_eval(spec.discount, t, spec.horizon)
        out.append((t, delta, abs(v - dT * gx) / delta))
    return out


def _require_scalar_convex(spec):
    if spec.dim != 1:
        raise DomainError("monotonicity diagnostics are for one-dimensional problems")
    g = spec.terminal
    if not (g.convex and g.has_hessian):
        raise DomainError("monotonicity diagnostics need a convex terminal payoff with a Hessian")


def minimizer_profile(spec, t, x_grid):
    """Minimizer selections along an increasing x grid, warm-started left to right."""
    t = _check_time(spec, t, allow_terminal=False)
    xs = _as_points(spec, x_grid)
    if np.any(np.diff(xs[:, 0]) <= 0):
        raise DomainError("x grid must be increasing")
    warm, sols = None, []
    for x in xs:
        sol = hopf_lax_value(spec, x, t, warm_start=warm)
        warm = sol.alpha
        sols.append(sol)
    return sols


def alpha_monotonicity(spec, t, x_grid, tol=1e-9):
    """Whether ``x -> alpha(x, t)`` is nondecreasing, and the worst decrease."""
    _require_scalar_convex(spec)
    sols = minimizer_profile(spec, t, x_grid)
    alphas = np.array([s.alpha[0] for s in sols])
    drops = alphas[:-1] - alphas[1:]
    worst = float(max(0.0, drops.max())) if len(drops) else 0.0
    return worst <= tol, worst


def tie_count(spec, t, x_grid, separation=1e-4):
    """Points where value-tied multistart candidates sit farther apart than ``separation``."""
    sols = minimizer_profile(spec, t, x_grid)
    return sum(1 for s in sols if s.tie_spread > separation)


def supermodularity_probe(spec, t, x, alpha, h=1e-3):
    """Central cross difference of the objective in ``(x, alpha)``."""
    _require_scalar_convex(spec)
    t = _check_time(spec, t, allow_terminal=False)
    x, alpha = float(np.ravel(x)[0]), float(np.ravel(alpha)[0])
    flow = _Flow(spec, t)

    def V(xx, aa):
        return flow.objective(np.array([xx]), np.array([aa]))

    return (V(x + h, alpha + h) - V(x + h, alpha - h) - V(x - h, alpha + h) + V(x - h, alpha - h)) / (4 * h * h)


def envelope_gap(spec, x, t, v_x, alpha):
    """``|v_x - d_t(T) grad_g(Y(T))|`` for a supplied derivative estimate."""
    y_end = arc_position(spec, t, x, alpha, spec.horizon)
    dT = discount_eval(spec.discount, t, spec.horizon)
    return float(np.max(np.abs(np.asarray(v_x) - dT * spec.terminal.gradient(y_end))))


def upper_bound_gap(spec, x, t, probes):
    """Largest ``v - V(alpha_probe)``; nonpositive when the minimum is global."""
    v = hopf_lax_value(spec, x, t).v
    return max(v - objective(spec, x, t, a) for a in probes)
