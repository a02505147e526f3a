"""Quadrature, unconstrained minimization and finite differences.

Every integral over a time interval in the package goes through
:func:`quadrature_nodes` / :func:`integrate`, and every minimization over
a parameter vector goes through :func:`minimize`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, NonConvergence, NonFinite

_ARMIJO = 1e-4
_MAX_HALVINGS = 60
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureConfig:
    panels: int = 64
    nodes_per_panel: int = 8
    abs_tol: float = 1e-10

    def __post_init__(self):
        if self.panels < 1:
            raise DomainError(f"panels must be >= 1, got {self.panels}")
        if self.nodes_per_panel not in (4, 8, 16):
            raise DomainError(f"nodes_per_panel must be 4, 8 or 16, got {self.nodes_per_panel}")
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")


@dataclass(frozen=True)
class MinimizeConfig:
    grad_tol: float = 1e-9
    max_iter: int = 200
    multistart: int = 9
    radius: float = 8.0
    tie_tol: float = 1e-9

    def __post_init__(self):
        for name in ("grad_tol", "max_iter", "multistart", "radius", "tie_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


@dataclass(frozen=True)
class FiniteDiffConfig:
    step: float = 1e-5
    scheme: str = "central"

    def __post_init__(self):
        if not 0 < self.step < 1:
            raise DomainError(f"finite-difference step must lie in (0, 1), got {self.step}")
        if self.scheme != "central":
            raise DomainError(f"unsupported finite-difference scheme {self.scheme!r}")


# -- quadrature ---------------------------------------------------------------


@lru_cache(maxsize=None)
def _gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def quadrature_nodes(t0, t1, cfg=None, panels=None):
    """Composite Gauss-Legendre nodes and weights on ``[t0, t1]``.

    ``panels`` overrides ``cfg.panels``.  A degenerate interval yields
    nodes with zero weights so callers need no special case.
    """
    cfg = cfg or QuadratureConfig()
    if t0 > t1:
        raise DomainError(f"integration bounds out of order: {t0} > {t1}")
    m = cfg.panels if panels is None else panels
    x, w = _gauss_legendre(cfg.nodes_per_panel)
    edges = np.linspace(t0, t1, m + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate(fn, t0, t1, cfg=None, *, vectorized=True, adaptive=False):
    """Integrate ``fn`` over ``[t0, t1]`` by composite Gauss-Legendre.

    ``fn`` receives the whole node array at once when ``vectorized`` and
    may return shape ``(m,)`` or ``(m, k)`` for vector-valued integrands.
    With ``adaptive=True`` the panel count is doubled until two successive
    estimates agree to ``cfg.abs_tol``.
    """
    cfg = cfg or QuadratureConfig()
    if t0 > t1:
        raise DomainError(f"integration bounds out of order: {t0} > {t1}")
    if t0 == t1:
        probe = _evaluate(fn, np.array([t0]), vectorized)
        return np.zeros(probe.shape[1:]) if probe.ndim > 1 else 0.0

    def estimate(panels):
        nodes, weights = quadrature_nodes(t0, t1, cfg, panels)
        values = _evaluate(fn, nodes, vectorized)
        return np.tensordot(weights, values, axes=(0, 0))

    result = estimate(cfg.panels)
    if adaptive:
        panels = cfg.panels
        while panels < 2**16:
            panels *= 2
            refined = estimate(panels)
            done = np.max(np.abs(refined - result)) <= cfg.abs_tol
            result = refined
            if done:
                break
    return float(result) if np.ndim(result) == 0 else result


def _evaluate(fn, nodes, vectorized):
    if vectorized:
        values = np.asarray(fn(nodes), dtype=float)
        if values.ndim == 0:
            values = np.broadcast_to(values, nodes.shape)
    else:
        values = np.array([fn(s) for s in nodes], dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonFinite("integrand produced a non-finite value")
    return values


# -- minimization -------------------------------------------------------------


@dataclass
class MinimizeResult:
    argmin: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    starts_used: int
    converged_starts: int
    tie_spread: float
    candidates: list = field(default_factory=list, repr=False)


def start_lattice(n, count, radius, center=None):
    """Multistart points: a centered tensor lattice of half-width ``radius``.

    The lattice has ``round(count ** (1/n))`` points per axis; the center
    itself is always included and comes first.
    """
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    k = max(1, int(round(count ** (1.0 / n))))
    if k == 1:
        return center[None, :].copy()
    axis = np.linspace(-radius, radius, k)
    pts = [center + np.array(offset) for offset in itertools.product(axis, repeat=n)]
    pts = [p for p in pts if not np.array_equal(p, center)]
    return np.array([center] + pts)


def minimize(fun, n, cfg=None, *, jac=None, hess=None, x0=None):
    """Minimize ``fun`` over R^n from a lattice of starts around ``x0``.

    ``jac=True`` means ``fun`` returns ``(value, gradient)``; a callable
    ``jac`` returns the gradient separately; ``None`` falls back to central
    differences.  With ``hess`` each start runs damped Newton, otherwise
    BFGS.  Among converged starts whose values are within ``tie_tol`` of
    the best, the lexicographically smallest argmin wins.
    """
    cfg = cfg or MinimizeConfig()
    fg = _value_and_grad(fun, jac)
    starts = start_lattice(n, cfg.multistart, cfg.radius, x0)

    results = [_local_search(fg, hess, x, cfg) for x in starts]
    total_iters = sum(r[3] for r in results)
    converged = [r for r in results if r[4]]
    if not converged:
        best = min(results, key=lambda r: r[1])
        raise NonConvergence(
            f"no start reached grad_tol={cfg.grad_tol:g} within {cfg.max_iter} iterations "
            f"(best |grad|={np.max(np.abs(best[2])):.3e})",
            best={"argmin": best[0], "value": best[1], "grad_norm": float(np.max(np.abs(best[2])))},
        )

    best_value = min(r[1] for r in converged)
    tied = [r for r in converged if r[1] <= best_value + cfg.tie_tol]
    tied.sort(key=lambda r: tuple(r[0]))
    winner = tied[0]
    spread = 0.0
    for a, b in itertools.combinations(tied, 2):
        spread = max(spread, float(np.max(np.abs(a[0] - b[0]))))
    return MinimizeResult(
        argmin=winner[0],
        value=winner[1],
        grad_norm=float(np.max(np.abs(winner[2]))),
        iterations=total_iters,
        starts_used=len(starts),
        converged_starts=len(converged),
        tie_spread=spread,
        candidates=[(r[0], r[1]) for r in converged],
    )


def _value_and_grad(fun, jac):
    if jac is True:
        def fg(x):
            f, g = fun(x)
            return float(f), np.asarray(g, dtype=float)
    elif callable(jac):
        def fg(x):
            return float(fun(x)), np.asarray(jac(x), dtype=float)
    else:
        fd = FiniteDiffConfig(step=1e-6)

        def fg(x):
            return float(fun(x)), finite_diff_grad(fun, x, fd)
    return fg


def _safe_eval(fg, x):
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            f, g = fg(x)
    except (NonFinite, OverflowError, FloatingPointError, np.linalg.LinAlgError):
        return np.inf, None
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return np.inf, None
    return f, g


def _newton_direction(H, g):
    n = len(g)
    shift = 0.0
    scale = max(1.0, float(np.max(np.abs(np.diag(H))))) if n else 1.0
    for _ in range(40):
        try:
            L = np.linalg.cholesky(H + shift * np.eye(n))
        except np.linalg.LinAlgError:
            shift = max(2 * shift, 1e-8 * scale)
            continue
        y = np.linalg.solve(L, -g)
        return np.linalg.solve(L.T, y)
    return -g


def _local_search(fg, hess, x0, cfg):
    """One descent run; returns (x, f, g, iterations, converged)."""
    x = np.array(x0, dtype=float)
    f, g = _safe_eval(fg, x)
    if g is None:
        return x, np.inf, np.full_like(x, np.inf), 0, False
    Hinv = None
    for it in range(cfg.max_iter + 1):
        if np.max(np.abs(g)) <= cfg.grad_tol:
            return x, f, g, it, True
        if it == cfg.max_iter:
            break
        if hess is not None:
            p = _newton_direction(np.asarray(hess(x), dtype=float), g)
        else:
            if Hinv is None:
                Hinv = np.eye(len(x))
            p = -Hinv @ g
        slope = float(g @ p)
        if not slope < 0:
            p, slope, Hinv = -g, -float(g @ g), None
        step = _line_search(fg, x, f, g, p, slope)
        if step is None and hess is None and Hinv is not None:
            # stale curvature model; retry along steepest descent
            Hinv = None
            p = -g
            step = _line_search(fg, x, f, g, p, -float(g @ g))
        if step is None:
            break
        x_new, f_new, g_new = step
        if hess is None:
            s, y = x_new - x, g_new - g
            sy = float(s @ y)
            if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                if Hinv is None or it == 0:
                    Hinv = (sy / float(y @ y)) * np.eye(len(x))
                rho = 1.0 / sy
                V = np.eye(len(x)) - rho * np.outer(s, y)
                Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
    return x, f, g, it, bool(np.max(np.abs(g)) <= cfg.grad_tol)


def _line_search(fg, x, f, g, p, slope):
    a = 1.0
    gnorm = np.linalg.norm(g)
    for _ in range(_MAX_HALVINGS):
        x_new = x + a * p
        f_new, g_new = _safe_eval(fg, x_new)
        if g_new is not None:
            if f_new <= f + _ARMIJO * a * slope:
                return x_new, f_new, g_new
            # near the optimum value changes drown in round-off; accept
            # steps that keep f flat to rounding and shrink the gradient
            if abs(f_new - f) <= 16 * _EPS * (1 + abs(f)) and np.linalg.norm(g_new) < gnorm:
                return x_new, f_new, g_new
        a *= 0.5
    return None


# -- finite differences -------------------------------------------------------


def finite_diff_grad(fn, x, cfg=None):
    """Central-difference gradient of a scalar function at ``x``."""
    cfg = cfg or FiniteDiffConfig()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = cfg.step
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fp, fm = float(fn(x + e)), float(fn(x - e))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFinite(f"non-finite function value near x[{i}]")
        grad[i] = (fp - fm) / (2 * h)
    return grad
