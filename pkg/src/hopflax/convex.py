"""Running-cost models, gradient inversion and the convex conjugate.

All model callbacks are vectorized over leading axes: a batch of points
has shape ``(..., n)``; values come back as ``(...)``, gradients as
``(..., n)`` and Hessians as ``(..., n, n)``.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, NonConvergence

IOTA_TOL = 1e-10
IOTA_MAX_ITER = 100


class LagrangianModel:
    """Strictly convex, superlinear C^2 running cost."""

    kind = "abstract"

    def __init__(self, dim):
        if int(dim) < 1:
            raise DomainError(f"dimension must be positive, got {dim}")
        self.dim = int(dim)

    def value(self, u):
        raise NotImplementedError

    def gradient(self, u):
        raise NotImplementedError

    def hessian(self, u):
        raise NotImplementedError

    def inverse_gradient(self, q):
        """Closed-form inverse of the gradient map, or None to iterate."""
        return None

    def flow_jacobian(self, alpha, scale):
        """Jacobian in ``alpha`` of ``iota(scale * gradient(alpha))``.

        ``scale`` is an array of shape ``(m,)``; returns ``(m, n, n)``.
        """
        alpha = np.asarray(alpha, dtype=float)
        scale = np.asarray(scale, dtype=float)
        u = iota(self, scale[:, None] * self.gradient(alpha)[None, :])
        rhs = scale[:, None, None] * self.hessian(alpha)[None, :, :]
        return np.linalg.solve(self.hessian(u), rhs)

    def describe(self):
        return {"kind": self.kind, "dim": self.dim}


class QuadraticLagrangian(LagrangianModel):
    """``l(u) = u.Q.u / 2`` with ``Q`` symmetric positive definite."""

    kind = "quadratic"

    def __init__(self, Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise DomainError(f"Q must be square, got shape {Q.shape}")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12):
            raise DomainError("Q must be symmetric")
        eig = np.linalg.eigvalsh(Q)
        if eig.min() <= 0:
            raise DomainError(f"Q must be positive definite (min eigenvalue {eig.min():g})")
        super().__init__(Q.shape[0])
        self.Q = Q
        self.Q_inv = np.linalg.inv(Q)

    def value(self, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", u, self.Q, u)

    def gradient(self, u):
        return np.asarray(u, dtype=float) @ self.Q

    def hessian(self, u):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(self.Q, u.shape[:-1] + self.Q.shape).copy()

    def inverse_gradient(self, q):
        return np.asarray(q, dtype=float) @ self.Q_inv

    def flow_jacobian(self, alpha, scale):
        scale = np.asarray(scale, dtype=float)
        return scale[:, None, None] * np.eye(self.dim)[None, :, :]

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "Q": self.Q.tolist()}


class PowerLagrangian(LagrangianModel):
    """Isotropic power cost ``l(u) = |u|^p / p`` with ``p > 1``.

    The Hessian degenerates at the origin when ``p != 2``; the closed-form
    inverse and flow Jacobian sidestep it.
    """

    kind = "power"

    def __init__(self, p, dim=1):
        if not p > 1:
            raise DomainError(f"power exponent must exceed 1, got {p}")
        super().__init__(dim)
        self.p = float(p)

    def value(self, u):
        r = np.linalg.norm(np.asarray(u, dtype=float), axis=-1)
        return r**self.p / self.p

    def gradient(self, u):
        u = np.asarray(u, dtype=float)
        r = np.linalg.norm(u, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(r > 0, r ** (self.p - 2), 0.0)
        return factor * u

    def hessian(self, u):
        u = np.asarray(u, dtype=float)
        r = np.linalg.norm(u, axis=-1)[..., None, None]
        eye = np.eye(self.dim)
        with np.errstate(divide="ignore", invalid="ignore"):
            uhat = np.where(r[..., 0] > 0, u / r[..., 0], 0.0)
            outer = uhat[..., :, None] * uhat[..., None, :]
            H = r ** (self.p - 2) * (eye + (self.p - 2) * outer)
        at_zero = r == 0
        if self.p == 2:
            fill = 1.0
        else:
            fill = 0.0 if self.p > 2 else np.inf
        return np.where(at_zero, np.where(eye > 0, fill, 0.0), H)

    def inverse_gradient(self, q):
        q = np.asarray(q, dtype=float)
        r = np.linalg.norm(q, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(r > 0, r ** (1.0 / (self.p - 1) - 1.0), 0.0)
        return factor * q

    def flow_jacobian(self, alpha, scale):
        # iota(c * grad(alpha)) = c**(1/(p-1)) * alpha by homogeneity
        factor = np.asarray(scale, dtype=float) ** (1.0 / (self.p - 1))
        return factor[:, None, None] * np.eye(self.dim)[None, :, :]

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "p": self.p}


class CustomLagrangian(LagrangianModel):
    """User-supplied value, gradient and Hessian callbacks.

    With ``vectorized=False`` the callbacks take a single point of shape
    ``(n,)`` and are looped over batches.
    """

    kind = "custom"

    def __init__(self, dim, value, gradient, hessian, vectorized=False):
        super().__init__(dim)
        self._value, self._gradient, self._hessian = value, gradient, hessian
        self.vectorized = vectorized

    def _batched(self, fn, u, tail):
        u = np.asarray(u, dtype=float)
        if self.vectorized:
            return np.asarray(fn(u), dtype=float)
        flat = u.reshape(-1, self.dim)
        out = np.array([np.asarray(fn(row), dtype=float) for row in flat])
        return out.reshape(u.shape[:-1] + tail)

    def value(self, u):
        return self._batched(self._value, u, ())

    def gradient(self, u):
        return self._batched(self._gradient, u, (self.dim,))

    def hessian(self, u):
        return self._batched(self._hessian, u, (self.dim, self.dim))


def quadratic(Q=None, dim=1):
    """Quadratic cost; ``Q`` defaults to the identity of size ``dim``."""
    if int(dim) < 1:
        raise DomainError(f"dimension must be positive, got {dim}")
    if Q is None:
        Q = np.eye(dim)
    elif np.ndim(Q) == 0:
        Q = float(Q) * np.eye(dim)
    return QuadraticLagrangian(Q)


def isotropic_power(p, dim=1):
    return PowerLagrangian(p, dim)


def custom(dim, value, gradient, hessian, vectorized=False):
    return CustomLagrangian(dim, value, gradient, hessian, vectorized)


def iota(model, q, tol=IOTA_TOL, max_iter=IOTA_MAX_ITER):
    """Solve ``gradient(u) = q`` for ``u`` (batched over leading axes of ``q``).

    Built-in models use their closed form.  Otherwise damped Newton from
    ``q / lambda_min(hessian(0))`` with backtracking on the residual.
    """
    q = np.asarray(q, dtype=float)
    closed = model.inverse_gradient(q)
    if closed is not None:
        return closed
    shape = q.shape
    Q = q.reshape(-1, model.dim)
    u = _newton_inverse(model, Q, tol, max_iter)
    return u.reshape(shape)


def _newton_inverse(model, q, tol, max_iter):
    h0 = model.hessian(np.zeros(model.dim))
    lam = float(np.linalg.eigvalsh(h0).min())
    u = q / lam if lam > 0 else q.copy()
    threshold = tol * (1.0 + np.max(np.abs(q), axis=1))
    r = model.gradient(u) - q
    err = np.max(np.abs(r), axis=1)
    for _ in range(max_iter):
        active = err > threshold
        if not active.any():
            return u
        ua, ra, qa, ea = u[active], r[active], q[active], err[active]
        try:
            step = np.linalg.solve(model.hessian(ua), ra[..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise NonConvergence("gradient inversion hit a singular Hessian",
                                 best={"residual": float(err.max())}) from None
        if not np.all(np.isfinite(step)):
            raise NonConvergence("gradient inversion produced a non-finite step",
                                 best={"residual": float(err.max())})
        a = np.ones(len(ua))
        pending = np.ones(len(ua), dtype=bool)
        trial, rt, et = ua.copy(), ra.copy(), ea.copy()
        for _ in range(40):
            cand = ua[pending] - a[pending, None] * step[pending]
            rc = model.gradient(cand) - qa[pending]
            ec = np.max(np.abs(rc), axis=1)
            ok = ec < (1 - 1e-4 * a[pending]) * ea[pending]
            idx = np.flatnonzero(pending)
            trial[idx[ok]], rt[idx[ok]], et[idx[ok]] = cand[ok], rc[ok], ec[ok]
            pending[idx[ok]] = False
            a[pending] *= 0.5
            if not pending.any():
                break
        if pending.any():
            # no decrease possible along the Newton direction: take the full
            # step anyway so a stagnating point surfaces as NonConvergence
            idx = np.flatnonzero(pending)
            trial[idx] = ua[idx] - step[idx]
            rt[idx] = model.gradient(trial[idx]) - qa[idx]
            et[idx] = np.max(np.abs(rt[idx]), axis=1)
        u[active], r[active], err[active] = trial, rt, et
    if np.all(err <= threshold):
        return u
    raise NonConvergence(
        f"gradient inversion did not converge in {max_iter} iterations "
        f"(max residual {err.max():.3e})",
        best={"residual": float(err.max())},
    )


def conjugate(model, p):
    """Legendre transform ``sup_u p.u - l(u)``, attained at ``iota(p)``."""
    p = np.asarray(p, dtype=float)
    u = iota(model, p)
    return np.sum(p * u, axis=-1) - model.value(u)


def diagnostics(model, samples=100, box=5.0, seed=0):
    """Numerical probes of strict convexity, superlinearity and gradient accuracy."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-box, box, size=(samples, model.dim))
    min_eig = float(np.linalg.eigvalsh(model.hessian(u)).min())
    asym = float(np.max(np.abs(model.hessian(u) - np.swapaxes(model.hessian(u), -1, -2))))

    e = rng.normal(size=(samples, model.dim))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    ratios = np.stack([model.value(r * e) / r for r in (10.0, 100.0, 1000.0)], axis=1)
    superlinear = bool(np.all(np.diff(ratios, axis=1) > 0))

    h = 1e-6
    worst = 0.0
    g = model.gradient(u)
    for i in range(model.dim):
        step = np.zeros(model.dim)
        step[i] = h
        fd = (model.value(u + step) - model.value(u - step)) / (2 * h)
        rel = np.abs(fd - g[:, i]) / np.maximum(1.0, np.abs(g[:, i]))
        worst = max(worst, float(rel.max()))
    return {
        "min_hessian_eigenvalue": min_eig,
        "hessian_asymmetry": asym,
        "superlinear": superlinear,
        "gradient_fd_rel_error": worst,
    }
