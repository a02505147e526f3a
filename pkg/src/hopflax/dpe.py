"""Dynamic-programming checks: the non-local term, the tail correction and PDE residuals.

``w_term`` is taken with plus signs,

    w(x, t, alpha) = int_t^T (d/dt d_t)(s) l(U(s)) ds + (d/dt d_t)(T) g(Y(T)),

which is the sign that makes ``-v_t + l*(-v_x) + w = 0`` hold and gives
``w = rho(t) v`` for exponential-rate discounts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import convex
from .discount import ExponentialRate, discount_dt, discount_eval
from .errors import DomainError
from .hopf import _check_time, _Flow, _vec, arc_position, foc_residual, hopf_lax_value, objective

__all__ = [
    "ResidualReport",
    "w_term",
    "w_tail",
    "dp_identity_residual",
    "dp_residual",
    "dissipation_residual",
    "foc_residual",
    "value_derivatives",
]


@dataclass
class ResidualReport:
    x: np.ndarray
    t: float
    v: float
    v_x: np.ndarray
    v_t: float
    w_value: float
    residual: float
    derivative_source: str

    def recomputed(self, lagrangian):
        return -self.v_t + float(convex.conjugate(lagrangian, -self.v_x)) + self.w_value


def w_term(spec, x, t, alpha):
    t = _check_time(spec, t, allow_terminal=False)
    x, alpha = _vec(spec, x), _vec(spec, alpha, "alpha")
    flow = _Flow(spec, t)
    _, U = flow.controls(alpha)
    rate = discount_dt(spec.discount, t, flow.nodes)
    running = float(flow.weights @ (rate * spec.lagrangian.value(U)))
    y_end = x + flow.displacement(U)
    rate_T = discount_dt(spec.discount, t, spec.horizon)
    return running + rate_T * float(spec.terminal.value(y_end))


def w_tail(spec, t, tau, y_tau, solution=None):
    """Cost gap between generations ``t`` and ``tau`` on the optimal continuation from ``(y_tau, tau)``."""
    T = spec.horizon
    t = _check_time(spec, t, allow_terminal=False)
    if not t < tau <= T:
        raise DomainError(f"tail correction needs t < tau <= T, got t={t}, tau={tau}")
    y_tau = _vec(spec, y_tau, "y_tau")
    g = spec.terminal
    gap_T = discount_eval(spec.discount, t, T) - discount_eval(spec.discount, tau, T)
    if T - tau <= spec.terminal_eps:
        return gap_T * float(g.value(y_tau))
    sol = solution or hopf_lax_value(spec, y_tau, tau)
    flow = _Flow(spec, tau)
    _, U = flow.controls(sol.alpha)
    gap = discount_eval(spec.discount, t, flow.nodes) - flow.d
    running = float(flow.weights @ (gap * spec.lagrangian.value(U)))
    return running + gap_T * float(g.value(y_tau + flow.displacement(U)))


def dp_identity_residual(spec, x, t, tau, velocity=None):
    """``v(x,t)`` minus the dynamic-programming bracket at the split time ``tau``.

    By default the arc on ``[t, tau]`` is the optimal one.  ``velocity`` (a
    vectorized map ``s -> (m, n)`` velocities) substitutes another arc; the
    residual must then be ``<= 0``.
    """
    x = _vec(spec, x)
    t = _check_time(spec, t, allow_terminal=False)
    if not t < tau <= spec.horizon:
        raise DomainError(f"split time must satisfy t < tau <= T, got tau={tau}")
    sol = hopf_lax_value(spec, x, t)
    head = _Flow(spec, t, tau)
    if velocity is None:
        _, U = head.controls(sol.alpha)
    else:
        U = np.asarray(velocity(head.nodes), dtype=float).reshape(len(head.nodes), spec.dim)
    running = head.running_cost(U)
    y_tau = x + head.displacement(U)
    if spec.horizon - tau <= spec.terminal_eps:
        v_tau = float(spec.terminal.value(y_tau))
        tail = w_tail(spec, t, tau, y_tau)
    else:
        cont = hopf_lax_value(spec, y_tau, tau)
        v_tau = cont.v
        tail = w_tail(spec, t, tau, y_tau, solution=cont)
    return sol.v - (running + v_tau + tail)


def value_derivatives(spec, x, t, source="finite-diff", solution=None):
    """``(v, v_x, v_t, solution)`` at an interior point.

    ``v_t`` is always a central difference of the value in ``t``; ``v_x`` is a
    central difference in ``x`` or, with ``source="envelope"``,
    ``d_t(T) grad_g(Y(T))``.
    """
    if source not in ("finite-diff", "envelope"):
        raise DomainError(f"unknown derivative source {source!r}")
    x = _vec(spec, x)
    t = _check_time(spec, t, allow_terminal=False)
    h = spec.fd_cfg.step
    if t - h < 0 or t + h > spec.horizon - spec.terminal_eps:
        raise DomainError(f"point t={t} too close to the boundary for step {h}")
    sol = solution or hopf_lax_value(spec, x, t)
    warm = sol.alpha

    def v_at(xx, tt):
        return hopf_lax_value(spec, xx, tt, warm_start=warm).v

    v_t = (v_at(x, t + h) - v_at(x, t - h)) / (2 * h)
    if source == "envelope":
        if not spec.terminal.has_gradient:
            raise DomainError("envelope derivative needs a terminal gradient")
        y_end = arc_position(spec, t, x, sol.alpha, spec.horizon)
        v_x = discount_eval(spec.discount, t, spec.horizon) * spec.terminal.gradient(y_end)
    else:
        v_x = np.empty(spec.dim)
        for i in range(spec.dim):
            e = np.zeros(spec.dim)
            e[i] = h
            v_x[i] = (v_at(x + e, t) - v_at(x - e, t)) / (2 * h)
    return sol.v, v_x, v_t, sol


def dp_residual(spec, x, t, source="finite-diff", solution=None):
    """Residual of ``-v_t + l*(-v_x) + w(x, t, iota(-v_x))``."""
    v, v_x, v_t, sol = value_derivatives(spec, x, t, source, solution)
    alpha = convex.iota(spec.lagrangian, -v_x)
    w_value = w_term(spec, x, t, alpha)
    residual = -v_t + float(convex.conjugate(spec.lagrangian, -v_x)) + w_value
    return ResidualReport(
        x=_vec(spec, x), t=float(t), v=v, v_x=v_x, v_t=v_t,
        w_value=w_value, residual=residual, derivative_source=source,
    )


def dissipation_residual(spec, x, t, solution=None):
    """Residual of ``-v_t + l*(-v_x) + rho(t) v`` (exponential-rate discounts only)."""
    if not isinstance(spec.discount, ExponentialRate):
        raise DomainError("dissipation residual needs an exponential-rate discount")
    v, v_x, v_t, _ = value_derivatives(spec, x, t, "finite-diff", solution)
    rho = float(spec.discount.rate(float(t)))
    return -v_t + float(convex.conjugate(spec.lagrangian, -v_x)) + rho * v


def exponential_reduction_gap(spec, x, t, alpha):
    """``|w - rho(t) V|`` and ``|V|`` for one parameter; exponential-rate only."""
    if not isinstance(spec.discount, ExponentialRate):
        raise DomainError("reduction check needs an exponential-rate discount")
    V = objective(spec, x, t, alpha)
    w = w_term(spec, x, t, alpha)
    return abs(w - float(spec.discount.rate(float(t))) * V), abs(V)
