"""Two-argument discount factors ``d_t(s)`` on ``0 <= t <= s <= T``.

``factor(t, s)`` is the present value at time ``t`` of a unit of cost at
time ``s``; ``dt(t, s)`` is its partial derivative in ``t``.  Both accept a
scalar ``t`` and array ``s``.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .numerics import _gauss_legendre

_TABLE_CELLS = 256
_SLACK = 1e-12


class DiscountModel:
    kind = "abstract"
    multiplicative = False

    def __init__(self, horizon, lower_bound):
        if not horizon > 0:
            raise DomainError(f"horizon must be positive, got {horizon}")
        self.horizon = float(horizon)
        if not lower_bound > 0:
            raise DomainError(f"discount lower bound must be positive, got {lower_bound}")
        self.lower_bound = float(lower_bound)

    @property
    def is_constant_one(self):
        return False

    def factor(self, t, s):
        raise NotImplementedError

    def dt(self, t, s):
        raise NotImplementedError

    def describe(self):
        return {"kind": self.kind, "horizon": self.horizon, "lower_bound": self.lower_bound}


class ExponentialRate(DiscountModel):
    """``d_t(s) = exp(-int_t^s rho)`` for a nonnegative continuous rate.

    A callable ``rho`` must accept arrays.  Its antiderivative is tabulated
    once at construction on a uniform grid refined by ``breakpoints``;
    evaluation adds a 16-point Gauss-Legendre integral over the partial cell,
    so piecewise-polynomial rates with kinks at breakpoints are exact.
    """

    kind = "exponential_rate"
    multiplicative = True

    def __init__(self, rho, horizon, breakpoints=()):
        T = float(horizon)
        if callable(rho):
            self._const = None
            self._rho = rho
            nodes = np.linspace(0.0, T, _TABLE_CELLS + 1)
            extra = [b for b in breakpoints if 0.0 < b < T]
            self._nodes = np.unique(np.concatenate([nodes, extra]))
            cells = self._cell_integrals(self._nodes[:-1], self._nodes[1:])
            self._table = np.concatenate([[0.0], np.cumsum(cells)])
            probe = rho(np.linspace(0.0, T, 1025))
            if not np.all(np.isfinite(probe)) or np.min(probe) < 0:
                raise DomainError("discount rate must be finite and nonnegative on [0, T]")
        else:
            rho = float(rho)
            if not (np.isfinite(rho) and rho >= 0):
                raise DomainError(f"discount rate must be finite and nonnegative, got {rho}")
            self._const = rho
        super().__init__(T, np.exp(-self.antiderivative(T)))

    @property
    def is_constant_one(self):
        return self._const == 0.0

    def rate(self, t):
        if self._const is not None:
            return np.full(np.shape(t), self._const) if np.ndim(t) else self._const
        return self._rho(t)

    def _cell_integrals(self, a, b):
        x, w = _gauss_legendre(16)
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        pts = a[..., None] + half[..., None] * (x + 1.0)
        return half * np.sum(w * self._rho(pts), axis=-1)

    def antiderivative(self, s):
        """``int_0^s rho``."""
        if self._const is not None:
            return self._const * np.asarray(s, dtype=float)
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self._nodes, s, side="right") - 1, 0, len(self._nodes) - 2)
        left = self._nodes[idx]
        return self._table[idx] + self._cell_integrals(left, s)

    def factor(self, t, s):
        s = np.asarray(s, dtype=float)
        if self._const is not None:
            return np.exp(-self._const * (s - t))
        return np.exp(-(self.antiderivative(s) - self.antiderivative(t)))

    def dt(self, t, s):
        return self.rate(t) * self.factor(t, s)

    def describe(self):
        out = super().describe()
        out["rho"] = self._const if self._const is not None else "callable"
        return out


class ElapsedTime(DiscountModel):
    """``d_t(s) = theta(s - t)`` with ``theta(0) = 1``; ``dtheta`` is theta'."""

    kind = "elapsed_time"

    def __init__(self, theta, dtheta, horizon, lower_bound=None, label="callable"):
        T = float(horizon)
        self._theta, self._dtheta = theta, dtheta
        self.label = label
        if abs(float(theta(np.array(0.0))) - 1.0) > _SLACK:
            raise DomainError("elapsed-time discount must satisfy theta(0) = 1")
        if lower_bound is None:
            lower_bound = float(np.min(theta(np.linspace(0.0, T, 2049))))
        super().__init__(T, lower_bound)

    def factor(self, t, s):
        return self._theta(np.asarray(s, dtype=float) - t)

    def dt(self, t, s):
        return -self._dtheta(np.asarray(s, dtype=float) - t)

    def describe(self):
        out = super().describe()
        out["theta"] = self.label
        return out


class CustomDiscount(DiscountModel):
    """Callbacks ``d(t, s)`` and ``dd_dt(t, s)``; the floor must be declared."""

    kind = "custom"

    def __init__(self, d, dd_dt, horizon, lower_bound, multiplicative=False):
        self._d, self._dd = d, dd_dt
        self.multiplicative = multiplicative
        super().__init__(horizon, lower_bound)

    def factor(self, t, s):
        return np.asarray(self._d(t, np.asarray(s, dtype=float)), dtype=float)

    def dt(self, t, s):
        return np.asarray(self._dd(t, np.asarray(s, dtype=float)), dtype=float)


def exponential_rate(rho, horizon, breakpoints=()):
    return ExponentialRate(rho, horizon, breakpoints)


def constant_one(horizon):
    """No discounting (``rho = 0``)."""
    return ExponentialRate(0.0, horizon)


def hyperbolic(k, horizon):
    """``theta(tau) = 1 / (1 + k tau)``."""
    if not k >= 0:
        raise DomainError(f"hyperbolic coefficient must be nonnegative, got {k}")
    k = float(k)
    return ElapsedTime(
        lambda tau: 1.0 / (1.0 + k * tau),
        lambda tau: -k / (1.0 + k * tau) ** 2,
        horizon,
        lower_bound=1.0 / (1.0 + k * float(horizon)),
        label=f"hyperbolic(k={k!r})",
    )


def elapsed_time(theta, dtheta, horizon, lower_bound=None):
    return ElapsedTime(theta, dtheta, horizon, lower_bound)


def piecewise_linear(knots, values):
    """Interpolating function and its right derivative through a table."""
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    if knots.ndim != 1 or knots.shape != values.shape or len(knots) < 2:
        raise DomainError("table needs matching knot and value lists of length >= 2")
    if np.any(np.diff(knots) <= 0):
        raise DomainError("table knots must be strictly increasing")
    slopes = np.diff(values) / np.diff(knots)

    def fn(x):
        return np.interp(x, knots, values)

    def dfn(x):
        idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    return fn, dfn


def rate_table(times, rates, horizon):
    """Exponential-rate discount with a piecewise-linear rate table."""
    times = np.asarray(times, dtype=float)
    if times[0] > 0 or times[-1] < horizon:
        raise DomainError("rate table must cover [0, horizon]")
    rho, _ = piecewise_linear(times, rates)
    return ExponentialRate(rho, horizon, breakpoints=tuple(times))


def theta_table(taus, values, horizon):
    """Elapsed-time discount with a piecewise-linear theta table."""
    taus = np.asarray(taus, dtype=float)
    if taus[0] != 0 or taus[-1] < horizon:
        raise DomainError("theta table must start at 0 and cover [0, horizon]")
    theta, dtheta = piecewise_linear(taus, values)
    inside = np.concatenate([np.asarray(values, dtype=float)[taus <= horizon], [theta(horizon)]])
    return ElapsedTime(theta, dtheta, horizon, lower_bound=float(np.min(inside)), label="table")


def _check_domain(model, t, s):
    T = model.horizon
    slack = _SLACK * max(1.0, T)
    t = float(t)
    s_arr = np.asarray(s, dtype=float)
    if t < -slack:
        raise DomainError(f"time t={t} is negative")
    if np.any(s_arr < t - slack):
        raise DomainError(f"discount evaluated with s < t (t={t})")
    if np.any(s_arr > T + slack):
        raise DomainError(f"discount evaluated beyond the horizon T={T}")
    return t, s_arr


def discount_eval(model, t, s):
    t, s_arr = _check_domain(model, t, s)
    out = model.factor(t, s_arr)
    return float(out) if np.ndim(s) == 0 else out


def discount_dt(model, t, s):
    t, s_arr = _check_domain(model, t, s)
    out = model.dt(t, s_arr)
    return float(out) if np.ndim(s) == 0 else out


def diagnostics(model, samples=40, seed=0):
    """Sampled checks of the normalization, the floor and the t-derivative."""
    rng = np.random.default_rng(seed)
    T = model.horizon
    t = rng.uniform(0, T, samples)
    s = t + rng.uniform(0, 1, samples) * (T - t)
    diag_err = max(abs(float(model.factor(ti, ti)) - 1.0) for ti in t)
    d = np.array([float(model.factor(ti, si)) for ti, si in zip(t, s)])
    h = 1e-6
    fd_err = 0.0
    for ti, si in zip(t, s):
        lo, hi = max(ti - h, 0.0), min(ti + h, si)
        if hi - lo < h:
            continue
        fd = (float(model.factor(hi, si)) - float(model.factor(lo, si))) / (hi - lo)
        exact = float(model.dt(0.5 * (lo + hi), si))
        fd_err = max(fd_err, abs(fd - exact) / max(1.0, abs(exact)))
    return {
        "normalization_error": diag_err,
        "min_factor": float(d.min()),
        "max_factor": float(d.max()),
        "lower_bound": model.lower_bound,
        "dt_fd_rel_error": fd_err,
    }
