"""Brute-force value functions that do not use the Hopf-Lax formula.

``transcribe_value`` minimizes the discounted cost directly over
piecewise-linear arcs on a uniform time grid.  ``bellman_value`` runs
backward induction on a state grid; it is only valid when the discount is
multiplicative, because otherwise each generation re-plans the tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .discount import discount_eval
from .errors import DomainError, NonConvergence
from .hopf import _check_time, _vec, hopf_lax_value, optimal_arc
from .numerics import MinimizeConfig, _gauss_legendre, minimize

_RULES = ("midpoint", "left", "cell")
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TranscriptionConfig:
    """``node_quadrature`` picks where the discount is sampled on each step.

    ``cell`` integrates the discount exactly over each step, which makes
    the discrete cost exact for piecewise-linear arcs and refinement
    monotone.
    """

    steps: int = 128
    node_quadrature: str = "midpoint"
    inner: MinimizeConfig = field(
        default_factory=lambda: MinimizeConfig(grad_tol=1e-10, max_iter=200, multistart=1)
    )

    def __post_init__(self):
        if self.steps < 2:
            raise DomainError(f"transcription needs at least 2 steps, got {self.steps}")
        if self.node_quadrature not in _RULES:
            raise DomainError(f"node_quadrature must be one of {_RULES}")


@dataclass(frozen=True)
class BellmanConfig:
    x_min: float = -2.0
    x_max: float = 2.0
    points: int = 401
    steps: int = 200
    golden_iters: int = 80

    def __post_init__(self):
        if not self.x_min < self.x_max or self.points < 4 or self.steps < 1:
            raise DomainError("invalid Bellman grid")


def step_weights(spec, t, steps, rule="midpoint"):
    """Per-step discount weights (already multiplied by the step length)."""
    T = spec.horizon
    edges = np.linspace(t, T, steps + 1)
    h = (T - t) / steps
    if rule == "midpoint":
        return h * discount_eval(spec.discount, t, 0.5 * (edges[1:] + edges[:-1]))
    if rule == "left":
        return h * discount_eval(spec.discount, t, edges[:-1])
    if rule == "cell":
        x, w = _gauss_legendre(16)
        half = 0.5 * h
        mid = 0.5 * (edges[1:] + edges[:-1])
        pts = np.clip(mid[:, None] + half * x[None, :], t, T)
        d = discount_eval(spec.discount, t, pts.ravel()).reshape(pts.shape)
        return half * (d @ w)
    raise DomainError(f"unknown node quadrature {rule!r}")


def arc_cost(spec, t, nodes, rule="midpoint"):
    """Discounted cost of the piecewise-linear arc through ``nodes``."""
    t = _check_time(spec, t, allow_terminal=False)
    nodes = np.asarray(nodes, dtype=float).reshape(-1, spec.dim)
    steps = len(nodes) - 1
    if steps < 1:
        raise DomainError("an arc needs at least two nodes")
    h = (spec.horizon - t) / steps
    c = step_weights(spec, t, steps, rule)
    vel = np.diff(nodes, axis=0) / h
    dT = discount_eval(spec.discount, t, spec.horizon)
    return float(c @ spec.lagrangian.value(vel) + dT * spec.terminal.value(nodes[-1]))


class _Transcription:
    """Cost, gradient and Hessian in the free nodes ``y_1 .. y_N`` (flattened)."""

    def __init__(self, spec, x, t, steps, rule):
        self.spec, self.x, self.steps = spec, x, steps
        self.n = spec.dim
        self.h = (spec.horizon - t) / steps
        self.c = step_weights(spec, t, steps, rule)
        self.dT = discount_eval(spec.discount, t, spec.horizon)

    def _nodes(self, y):
        return np.vstack([self.x, y.reshape(self.steps, self.n)])

    def fun(self, y):
        nodes = self._nodes(y)
        vel = np.diff(nodes, axis=0) / self.h
        ell, g = self.spec.lagrangian, self.spec.terminal
        value = float(self.c @ ell.value(vel) + self.dT * g.value(nodes[-1]))
        flux = self.c[:, None] * ell.gradient(vel) / self.h
        grad = flux.copy()
        grad[:-1] -= flux[1:]
        grad[-1] += self.dT * g.gradient(nodes[-1])
        return value, grad.ravel()

    def hess(self, y):
        nodes = self._nodes(y)
        vel = np.diff(nodes, axis=0) / self.h
        n, N = self.n, self.steps
        B = self.c[:, None, None] * self.spec.lagrangian.hessian(vel) / self.h**2
        H = np.zeros((N * n, N * n))
        for i in range(N):
            # step i joins node i (free when i >= 1) to node i + 1
            hi = slice(i * n, (i + 1) * n)
            H[hi, hi] += B[i]
            if i >= 1:
                lo = slice((i - 1) * n, i * n)
                H[lo, lo] += B[i]
                H[lo, hi] -= B[i]
                H[hi, lo] -= B[i]
        last = slice((N - 1) * n, N * n)
        H[last, last] += self.dT * self.spec.terminal.hessian(nodes[-1])
        return H


def transcribe_value(spec, x, t, cfg=None, warm_arc=True):
    """Direct-transcription value, minimized from the Hopf-Lax arc and the constant arc."""
    cfg = cfg or TranscriptionConfig()
    x = _vec(spec, x)
    t = _check_time(spec, t, allow_terminal=False)
    problem = _Transcription(spec, x, t, cfg.steps, cfg.node_quadrature)
    hess = problem.hess if spec.terminal.has_hessian else None
    jac = True if spec.terminal.has_gradient else None
    fun = problem.fun if jac else (lambda y: problem.fun(y)[0])

    starts = [np.tile(x, cfg.steps)]
    if warm_arc:
        arc = optimal_arc(spec, x, t, samples=cfg.steps + 1)
        starts.insert(0, arc.positions[1:].ravel())

    best, failures = None, []
    for y0 in starts:
        try:
            res = minimize(fun, cfg.steps * spec.dim, cfg.inner, jac=jac, hess=hess, x0=y0)
        except NonConvergence as exc:
            failures.append(exc)
            continue
        if best is None or res.value < best:
            best = res.value
    if best is None:
        values = [f.best["value"] for f in failures if f.best]
        raise NonConvergence("transcription did not converge from any start",
                             best={"value": min(values) if values else None})
    return float(best)


def bellman_value(spec, x, t, cfg=None, force=False):
    """Backward induction on a 1-D state grid.

    Refuses non-multiplicative discounts unless ``force``; a forced run uses
    each step's own one-step discount, i.e. the naive recursion.
    """
    cfg = cfg or BellmanConfig()
    if spec.dim != 1:
        raise DomainError("Bellman oracle is one-dimensional")
    if not spec.discount.multiplicative and not force:
        raise DomainError(
            f"{spec.discount.kind} discount is not multiplicative; backward induction "
            "ignores the tail correction and would return a different problem's value"
        )
    x = _vec(spec, x)
    t = _check_time(spec, t, allow_terminal=False)
    T = spec.horizon
    grid = np.linspace(cfg.x_min, cfg.x_max, cfg.points)
    times = np.linspace(t, T, cfg.steps + 1)
    h = (T - t) / cfg.steps
    gl_x, gl_w = _gauss_legendre(16)
    ell = spec.lagrangian
    V = spec.terminal.value(grid[:, None])

    for k in range(cfg.steps - 1, -1, -1):
        s0, s1 = times[k], times[k + 1]
        pts = np.clip(0.5 * (s0 + s1) + 0.5 * h * gl_x, s0, s1)
        run_w = 0.5 * h * float(gl_w @ discount_eval(spec.discount, s0, pts))
        carry = discount_eval(spec.discount, s0, s1)
        nxt = CubicSpline(grid, V)

        def cost(z):
            u = ((z - grid) / h)[:, None]
            return run_w * ell.value(u) + carry * nxt(z)

        lo = np.full_like(grid, cfg.x_min)
        hi = np.full_like(grid, cfg.x_max)
        for _ in range(cfg.golden_iters):
            a = hi - _GOLDEN * (hi - lo)
            b = lo + _GOLDEN * (hi - lo)
            left = cost(a) < cost(b)
            hi = np.where(left, b, hi)
            lo = np.where(left, lo, a)
        z = 0.5 * (lo + hi)
        V = cost(z)

    return float(CubicSpline(grid, V)(x[0]))
