"""Discounted Hopf-Lax solver: value functions, minimizers and optimal arcs
for finite-horizon variational problems with non-constant discount."""

from .convex import conjugate, iota, isotropic_power, quadratic
from .discount import (
    constant_one,
    discount_dt,
    discount_eval,
    exponential_rate,
    hyperbolic,
)
from .errors import DomainError, HopfLaxError, NonConvergence, NonFinite
from .hopf import (
    Arc,
    ProblemSpec,
    SolveResult,
    TerminalModel,
    arc_position,
    classical_hopf_lax,
    control_profile,
    hamiltonian,
    hopf_lax_value,
    linear_terminal,
    objective,
    optimal_arc,
    pseudo_huber,
    zero_terminal,
)

__version__ = "0.1.0"
