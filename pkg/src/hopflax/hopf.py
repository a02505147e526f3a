"""Value function, minimizers and optimal arcs via the discounted Hopf-Lax formula.

For a parameter ``alpha`` the candidate control is
``U(s) = iota(grad_l(alpha) / d_t(s))`` and the candidate arc is
``Y(s) = x + int_t^s U``.  The value ``v(x, t)`` is the minimum over
``alpha`` of the discounted running cost of ``U`` plus ``d_t(T) g(Y(T))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import convex
from .discount import DiscountModel, discount_eval
from .errors import DomainError
from .numerics import (
    FiniteDiffConfig,
    MinimizeConfig,
    QuadratureConfig,
    minimize,
    quadrature_nodes,
)


# -- terminal (scrap-value) models ------------------------------------------


class TerminalModel:
    """Globally Lipschitz terminal payoff ``g`` (vectorized over leading axes)."""

    kind = "custom"

    def __init__(self, dim, value, gradient=None, hessian=None, lip_const=None, convex=False):
        self.dim = int(dim)
        self._value, self._gradient, self._hessian = value, gradient, hessian
        self.lip_const = None if lip_const is None else float(lip_const)
        self.convex = bool(convex)

    @property
    def has_gradient(self):
        return self._gradient is not None

    @property
    def has_hessian(self):
        return self._hessian is not None

    def value(self, x):
        return np.asarray(self._value(np.asarray(x, dtype=float)), dtype=float)

    def gradient(self, x):
        if self._gradient is None:
            raise DomainError(f"{self.kind} terminal model has no gradient")
        return np.asarray(self._gradient(np.asarray(x, dtype=float)), dtype=float)

    def hessian(self, x):
        if self._hessian is None:
            raise DomainError(f"{self.kind} terminal model has no Hessian")
        return np.asarray(self._hessian(np.asarray(x, dtype=float)), dtype=float)

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "lipschitz": self.lip_const, "convex": self.convex}


class LinearTerminal(TerminalModel):
    kind = "linear"

    def __init__(self, a, b=0.0, lip_const=None):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        self.a, self.b = a, float(b)
        n = a.size
        super().__init__(
            n,
            lambda x: x @ a + self.b,
            lambda x: np.broadcast_to(a, x.shape).copy(),
            lambda x: np.zeros(x.shape[:-1] + (n, n)),
            lip_const=float(np.linalg.norm(a)) if lip_const is None else lip_const,
            convex=True,
        )

    def describe(self):
        return {**super().describe(), "a": self.a.tolist(), "b": self.b}


class PseudoHuberTerminal(TerminalModel):
    """``g(x) = c^2 (sqrt(1 + |x - x0|^2 / c^2) - 1)``: convex, smooth, Lipschitz ``c``."""

    kind = "pseudo_huber"

    def __init__(self, scale=1.0, dim=1, center=None, lip_const=None):
        c = float(scale)
        if not c > 0:
            raise DomainError(f"pseudo-Huber scale must be positive, got {scale}")
        x0 = np.zeros(dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
        if x0.size != dim:
            raise DomainError("pseudo-Huber center has the wrong dimension")
        self.scale, self.center = c, x0

        def root(x):
            z = x - x0
            return z, np.sqrt(1.0 + np.sum(z * z, axis=-1) / c**2)

        def value(x):
            _, r = root(x)
            return c**2 * (r - 1.0)

        def gradient(x):
            z, r = root(x)
            return z / r[..., None]

        def hessian(x):
            z, r = root(x)
            eye = np.eye(dim)
            outer = z[..., :, None] * z[..., None, :]
            return eye / r[..., None, None] - outer / (c**2 * r[..., None, None] ** 3)

        super().__init__(dim, value, gradient, hessian, lip_const=c if lip_const is None else lip_const, convex=True)

    def describe(self):
        return {**super().describe(), "scale": self.scale, "center": self.center.tolist()}


def linear_terminal(a, b=0.0):
    return LinearTerminal(a, b)


def zero_terminal(dim=1):
    return LinearTerminal(np.zeros(dim), 0.0)


def pseudo_huber(scale=1.0, dim=1, center=None):
    return PseudoHuberTerminal(scale, dim, center)


# -- problem and results -------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    dim: int
    horizon: float
    lagrangian: convex.LagrangianModel
    terminal: TerminalModel
    discount: DiscountModel
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    min_cfg: MinimizeConfig = field(default_factory=MinimizeConfig)
    fd_cfg: FiniteDiffConfig = field(default_factory=FiniteDiffConfig)
    terminal_eps: float = 1e-7

    def __post_init__(self):
        if abs(self.discount.horizon - self.horizon) > 1e-12 * max(1.0, self.horizon):
            raise DomainError("discount horizon differs from the problem horizon")
        if not (self.lagrangian.dim == self.dim == self.terminal.dim):
            raise DomainError(
                f"dimension mismatch: dim={self.dim}, lagrangian={self.lagrangian.dim}, "
                f"terminal={self.terminal.dim}"
            )
        if not self.terminal_eps >= 0:
            raise DomainError("terminal_eps must be nonnegative")

    def replace(self, **changes):
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ProblemSpec(**fields)


@dataclass
class SolveResult:
    v: float
    alpha: np.ndarray
    p: np.ndarray
    foc_residual: float | None
    starts_used: int
    iterations: int
    tie_spread: float = 0.0
    converged_starts: int = 0

    def to_dict(self):
        return {
            "v": self.v,
            "alpha": self.alpha.tolist(),
            "p": self.p.tolist(),
            "foc_residual": self.foc_residual,
            "diagnostics": {
                "starts_used": self.starts_used,
                "converged_starts": self.converged_starts,
                "iterations": self.iterations,
                "tie_spread": self.tie_spread,
            },
        }


@dataclass
class Arc:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    cost: float
    alpha: np.ndarray
    v: float


# -- building blocks -----------------------------------------------------------


def _vec(spec, x, name="x"):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (spec.dim,):
        raise DomainError(f"{name} must have {spec.dim} components, got shape {arr.shape}")
    return arr


def _check_time(spec, t, allow_terminal=True):
    T = spec.horizon
    if not (0.0 <= t <= T) or (not allow_terminal and t >= T):
        bound = "T]" if allow_terminal else "T)"
        raise DomainError(f"time t={t} outside [0, {bound} with T={T}")
    return float(t)


def control_profile(spec, t, alpha, s):
    """Candidate control ``U_{t,alpha}(s)``; ``s`` may be an array."""
    t = _check_time(spec, t)
    alpha = _vec(spec, alpha, "alpha")
    d = np.atleast_1d(discount_eval(spec.discount, t, s))
    q = spec.lagrangian.gradient(alpha)
    U = convex.iota(spec.lagrangian, q[None, :] / d[:, None])
    return U[0] if np.ndim(s) == 0 else U


class _Flow:
    """Quadrature-node samples of the candidate control from ``(x, t)``."""

    def __init__(self, spec, t, t_end=None, panels=None):
        self.spec = spec
        self.t = t
        end = spec.horizon if t_end is None else t_end
        self.nodes, self.weights = quadrature_nodes(t, end, spec.quad, panels)
        self.d = discount_eval(spec.discount, t, self.nodes)
        self.dT = discount_eval(spec.discount, t, spec.horizon)

    def controls(self, alpha):
        q = self.spec.lagrangian.gradient(alpha)
        return q, convex.iota(self.spec.lagrangian, q[None, :] / self.d[:, None])

    def running_cost(self, U):
        return float(self.weights @ (self.d * self.spec.lagrangian.value(U)))

    def displacement(self, U):
        return self.weights @ U

    def jacobian(self, alpha):
        """``d Y(T) / d alpha`` as an ``(n, n)`` matrix."""
        J = self.spec.lagrangian.flow_jacobian(alpha, 1.0 / self.d)
        return np.tensordot(self.weights, J, axes=(0, 0))

    def objective(self, x, alpha, with_grad=False):
        q, U = self.controls(alpha)
        y_end = x + self.displacement(U)
        g = self.spec.terminal
        value = self.running_cost(U) + self.dT * float(g.value(y_end))
        if not with_grad:
            return value
        costate = q + self.dT * g.gradient(y_end)
        return value, self.jacobian(alpha).T @ costate


def arc_position(spec, t, x, alpha, s):
    """``Y_{t,x,alpha}(s) = x + int_t^s U``."""
    t = _check_time(spec, t)
    x = _vec(spec, x)
    alpha = _vec(spec, alpha, "alpha")
    if not t <= s <= spec.horizon:
        raise DomainError(f"arc evaluated at s={s} outside [{t}, {spec.horizon}]")
    if s == t:
        return x.copy()
    flow = _Flow(spec, t, s)
    return x + flow.displacement(flow.controls(alpha)[1])


def objective(spec, x, t, alpha):
    """Total discounted cost of the candidate arc with parameter ``alpha``."""
    t = _check_time(spec, t, allow_terminal=False)
    return _Flow(spec, t).objective(_vec(spec, x), _vec(spec, alpha, "alpha"))


def foc_residual(spec, x, t, alpha):
    """Sup-norm of ``grad_l(alpha) + d_t(T) grad_g(Y(T))``."""
    t = _check_time(spec, t)
    x, alpha = _vec(spec, x), _vec(spec, alpha, "alpha")
    if not spec.terminal.has_gradient:
        raise DomainError("first-order condition needs a terminal gradient")
    if spec.horizon - t <= 0:
        y_end, dT = x, 1.0
    else:
        y_end = arc_position(spec, t, x, alpha, spec.horizon)
        dT = discount_eval(spec.discount, t, spec.horizon)
    r = spec.lagrangian.gradient(alpha) + dT * spec.terminal.gradient(y_end)
    return float(np.max(np.abs(r)))


def hopf_lax_value(spec, x, t, warm_start=None):
    """Minimize the objective over ``alpha``; see :class:`SolveResult`."""
    x = _vec(spec, x)
    t = _check_time(spec, t)
    g = spec.terminal
    if spec.horizon - t <= spec.terminal_eps:
        if g.has_gradient:
            dT = discount_eval(spec.discount, t, spec.horizon)
            alpha = convex.iota(spec.lagrangian, -dT * g.gradient(x))
        else:
            alpha = np.zeros(spec.dim)
        return SolveResult(
            v=float(g.value(x)),
            alpha=alpha,
            p=spec.lagrangian.gradient(alpha),
            foc_residual=foc_residual(spec, x, spec.horizon, alpha) if g.has_gradient else None,
            starts_used=0,
            iterations=0,
        )

    flow = _Flow(spec, t)
    if g.has_gradient:
        res = minimize(lambda a: flow.objective(x, a, with_grad=True), spec.dim, spec.min_cfg,
                       jac=True, x0=warm_start)
    else:
        res = minimize(lambda a: flow.objective(x, a), spec.dim, spec.min_cfg, x0=warm_start)
    alpha = res.argmin
    return SolveResult(
        v=float(res.value),
        alpha=alpha,
        p=spec.lagrangian.gradient(alpha),
        foc_residual=foc_residual(spec, x, t, alpha) if g.has_gradient else None,
        starts_used=res.starts_used,
        iterations=res.iterations,
        tie_spread=res.tie_spread,
        converged_starts=res.converged_starts,
    )


def optimal_arc(spec, x, t, samples=101, solution=None):
    """Sample the optimal arc on a uniform grid of ``samples`` times in ``[t, T]``."""
    if samples < 2:
        raise DomainError("an arc needs at least two samples")
    x = _vec(spec, x)
    t = _check_time(spec, t, allow_terminal=False)
    sol = solution or hopf_lax_value(spec, x, t)
    alpha = sol.alpha
    per = max(1, math.ceil(spec.quad.panels / (samples - 1)))
    flow = _Flow(spec, t, panels=per * (samples - 1))
    q, U = flow.controls(alpha)
    m = spec.quad.nodes_per_panel * per
    pieces = (flow.weights[:, None] * U).reshape(samples - 1, m, spec.dim).sum(axis=1)
    positions = x + np.vstack([np.zeros(spec.dim), np.cumsum(pieces, axis=0)])
    times = np.linspace(t, spec.horizon, samples)
    velocities = control_profile(spec, t, alpha, times)
    cost = flow.running_cost(U) + flow.dT * float(spec.terminal.value(positions[-1]))
    return Arc(times=times, positions=positions, velocities=velocities, cost=cost, alpha=alpha, v=sol.v)


def hamiltonian(spec, t, s, u, p):
    """``p.u - d_t(s) l(u)``."""
    u, p = _vec(spec, u, "u"), _vec(spec, p, "p")
    d = discount_eval(spec.discount, _check_time(spec, t), s)
    return float(p @ u - d * spec.lagrangian.value(u))


def classical_hopf_lax(spec, x, t):
    """Undiscounted formula: min over endpoints z of ``tau l((z - x)/tau) + g(z)``."""
    if not spec.discount.is_constant_one:
        raise DomainError("classical Hopf-Lax formula needs the constant-one discount")
    x = _vec(spec, x)
    t = _check_time(spec, t, allow_terminal=False)
    tau = spec.horizon - t
    ell, g = spec.lagrangian, spec.terminal

    def fun(z):
        return tau * float(ell.value((z - x) / tau)) + float(g.value(z))

    jac = hess = None
    if g.has_gradient:
        def jac(z):
            return ell.gradient((z - x) / tau) + g.gradient(z)
        if g.has_hessian:
            def hess(z):
                return ell.hessian((z - x) / tau) / tau + g.hessian(z)
    return float(minimize(fun, spec.dim, spec.min_cfg, jac=jac, hess=hess, x0=x).value)


def steer(spec, x, t, target):
    """Find ``alpha`` with ``Y_{t,x,alpha}(T)`` at ``target``; returns ``(alpha, miss)``."""
    x, target = _vec(spec, x), _vec(spec, target, "target")
    t = _check_time(spec, t, allow_terminal=False)
    flow = _Flow(spec, t)

    def fun(a):
        miss = x + flow.displacement(flow.controls(a)[1]) - target
        return float(miss @ miss), 2.0 * flow.jacobian(a).T @ miss

    cfg = MinimizeConfig(grad_tol=1e-13, max_iter=500, multistart=1)
    res = minimize(fun, spec.dim, cfg, jac=True, x0=(target - x) / (spec.horizon - t))
    return res.argmin, math.sqrt(res.value)
