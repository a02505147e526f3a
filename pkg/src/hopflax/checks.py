"""Desk-scale verification suites run by ``hopflax check``."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import analysis, convex, dpe, oracle
from . import discount as disc
from .discount import ExponentialRate
from .errors import DomainError
from .hopf import hopf_lax_value, objective, steer


@dataclass
class Criterion:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def __post_init__(self):
        # numpy scalars are not JSON serializable
        self.passed = bool(self.passed)
        self.measured = float(self.measured)
        self.tolerance = float(self.tolerance)

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}: measured={self.measured:.3e} tolerance={self.tolerance:.1e} {self.detail}".rstrip()

    def to_dict(self):
        return asdict(self)


def _point(spec, c):
    return np.full(spec.dim, float(c))


def oracle_suite(spec):
    T = spec.horizon
    cfg = oracle.TranscriptionConfig(steps=256)
    worst = 0.0
    for t in (0.0, T / 3, 2 * T / 3):
        for c in (-1.0, 0.0, 1.0):
            x = _point(spec, c)
            gap = abs(hopf_lax_value(spec, x, t).v - oracle.transcribe_value(spec, x, t, cfg))
            worst = max(worst, gap)
    out = [Criterion("transcription_agreement_3x3", worst <= 5e-3, worst, 5e-3)]
    if spec.dim == 1:
        if spec.discount.multiplicative:
            gap = abs(oracle.bellman_value(spec, [0.0], 0.0) - hopf_lax_value(spec, [0.0], 0.0).v)
            out.append(Criterion("bellman_agreement_origin", gap <= 2e-3, gap, 2e-3))
        else:
            try:
                oracle.bellman_value(spec, [0.0], 0.0)
                refused = False
            except DomainError:
                refused = True
            out.append(Criterion("bellman_refuses_non_multiplicative", refused, float(refused), 1.0))
            diff = max(
                abs(oracle.bellman_value(spec, [c], 0.0, force=True)
                    - oracle.transcribe_value(spec, [c], 0.0, cfg))
                for c in (-1.0, 0.0, 1.0)
            )
            out.append(Criterion("naive_bellman_differs", diff > 5e-3, diff, 5e-3, "must exceed"))
    return out


def residuals_suite(spec):
    T = spec.horizon
    xs = np.linspace(-1.0, 1.0, 5)[:, None] * np.ones(spec.dim)
    ts = np.linspace(0.1 * T, 0.9 * T, 5)
    grid = analysis.grid_eval(spec, xs, ts, residuals=True)
    worst = float(np.nanmax(np.abs(grid.dp_residual)))
    out = [Criterion("dp_residual_5x5", worst <= 1e-3, worst, 1e-3)]
    if isinstance(spec.discount, ExponentialRate):
        diss = float(np.nanmax(np.abs(grid.dissipation_residual)))
        out.append(Criterion("dissipation_residual_5x5", diss <= 1e-3, diss, 1e-3))
        gap = float(np.nanmax(np.abs(grid.dp_residual - grid.dissipation_residual)))
        out.append(Criterion("dp_vs_dissipation_consistency", gap <= 1e-6, gap, 1e-6))
    return out


def terminal_suite(spec):
    T = spec.horizon
    ts = [T - T * 2.0**-k for k in range(3, 11)]
    ratios = np.array([r for _, _, r in analysis.terminal_convergence(spec, _point(spec, 0.5), ts)])
    finite = bool(np.all(np.isfinite(ratios)))
    if finite and ratios.min() > 0:
        spread = float(ratios.max() / ratios.min())
    else:
        spread = 1.0 if finite and ratios.max() == 0 else float("inf")
    return [Criterion("terminal_ratio_bounded", finite and spread <= 3.0, spread, 3.0, "max/min ratio")]


def monotonicity_suite(spec, seed=0):
    t = 0.5 * spec.horizon
    ok, worst = analysis.alpha_monotonicity(spec, t, np.linspace(-3.0, 3.0, 101))
    rng = np.random.default_rng(seed)
    probes = [analysis.supermodularity_probe(spec, t, x, a)
              for x, a in zip(rng.uniform(-3, 3, 25), rng.uniform(-2, 2, 25))]
    low = float(min(probes))
    return [
        Criterion("alpha_nondecreasing_101", ok, worst, 1e-9, "worst decrease"),
        Criterion("supermodularity_25", low >= -1e-6, low, -1e-6, "minimum cross difference"),
    ]


def properties_suite(spec, seed=0):
    rng = np.random.default_rng(seed)
    ell = spec.lagrangian
    out = []
    u = rng.uniform(-5, 5, size=(1000, spec.dim))
    trip = float(np.max(np.abs(convex.iota(ell, ell.gradient(u)) - u)))
    out.append(Criterion("iota_round_trip", trip <= 1e-8, trip, 1e-8))
    p = rng.uniform(-5, 5, size=(1000, spec.dim))
    gap = ell.value(u) + convex.conjugate(ell, p) - np.sum(p * u, axis=1)
    out.append(Criterion("fenchel_young", float(gap.min()) >= -1e-9, float(gap.min()), -1e-9, "minimum gap"))

    d = disc.diagnostics(spec.discount)
    out.append(Criterion("discount_normalization", d["normalization_error"] <= 1e-12, d["normalization_error"], 1e-12))
    floor_ok = d["lower_bound"] <= d["min_factor"] and d["max_factor"] <= 1.0 + 1e-12
    out.append(Criterion("discount_floor", floor_ok, d["min_factor"], d["lower_bound"], "min sampled factor"))
    out.append(Criterion("discount_dt_matches_fd", d["dt_fd_rel_error"] <= 1e-5, d["dt_fd_rel_error"], 1e-5))

    x, t = _point(spec, 0.5), 0.5 * spec.horizon
    sol = hopf_lax_value(spec, x, t)
    probes = rng.normal(scale=2.0, size=(200, spec.dim))
    excess = max(sol.v - objective(spec, x, t, a) for a in probes)
    out.append(Criterion("hopf_lax_upper_bound", excess <= 1e-9, excess, 1e-9, "max v - V(probe)"))

    if spec.terminal.has_gradient:
        _, v_x, _, _ = dpe.value_derivatives(spec, x, t, "finite-diff", sol)
        env = analysis.envelope_gap(spec, x, t, v_x, sol.alpha)
        out.append(Criterion("envelope_identity", env <= 1e-4, env, 1e-4))

    worst_miss = 0.0
    for target in rng.uniform(-3, 3, size=(5, spec.dim)):
        _, miss = steer(spec, x, t, target)
        worst_miss = max(worst_miss, miss)
    out.append(Criterion("endpoint_surjectivity", worst_miss <= 1e-6, worst_miss, 1e-6))
    return out


SUITES = {
    "oracle": oracle_suite,
    "residuals": residuals_suite,
    "terminal": terminal_suite,
    "monotonicity": monotonicity_suite,
    "properties": properties_suite,
}


def run_suite(name, spec):
    if name not in SUITES:
        raise DomainError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](spec)
