"""JSON problem files: schema, validation and conversion to :class:`ProblemSpec`."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import convex
from . import discount as disc
from .hopf import LinearTerminal, ProblemSpec, PseudoHuberTerminal
from .numerics import FiniteDiffConfig, MinimizeConfig, QuadratureConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class QuadraticLagrangianConfig(_Strict):
    kind: Literal["quadratic"]
    Q: Optional[Union[float, List[List[float]]]] = None


class PowerLagrangianConfig(_Strict):
    kind: Literal["power"]
    p: float = Field(gt=1)


LagrangianConfig = Annotated[
    Union[QuadraticLagrangianConfig, PowerLagrangianConfig], Field(discriminator="kind")
]


class LinearTerminalConfig(_Strict):
    kind: Literal["linear"]
    a: Union[float, List[float]] = 0.0
    b: float = 0.0
    lipschitz: Optional[float] = None
    convex: bool = True


class PseudoHuberTerminalConfig(_Strict):
    kind: Literal["pseudo_huber"]
    scale: float = Field(default=1.0, gt=0)
    center: Optional[List[float]] = None
    lipschitz: Optional[float] = None
    convex: bool = True


TerminalConfig = Annotated[
    Union[LinearTerminalConfig, PseudoHuberTerminalConfig], Field(discriminator="kind")
]


class RateTable(_Strict):
    t: List[float]
    values: List[float]


class ThetaTable(_Strict):
    tau: List[float]
    values: List[float]


class ExponentialRateConfig(_Strict):
    kind: Literal["exponential_rate"]
    rho: Union[float, RateTable] = 0.0


class ElapsedTimeConfig(_Strict):
    """Either a hyperbolic coefficient ``k`` or a piecewise-linear ``theta`` table."""

    kind: Literal["elapsed_time"]
    k: Optional[float] = Field(default=None, ge=0)
    theta: Optional[ThetaTable] = None

    @model_validator(mode="after")
    def _one_form(self):
        if (self.k is None) == (self.theta is None):
            raise ValueError("elapsed_time discount needs exactly one of 'k' or 'theta'")
        return self


DiscountConfig = Annotated[
    Union[ExponentialRateConfig, ElapsedTimeConfig], Field(discriminator="kind")
]


class QuadratureOverrides(_Strict):
    panels: int = 64
    nodes_per_panel: Literal[4, 8, 16] = 8
    abs_tol: float = 1e-10


class MinimizeOverrides(_Strict):
    grad_tol: float = 1e-9
    max_iter: int = 200
    multistart: int = 9
    radius: float = 8.0
    tie_tol: float = 1e-9


class FiniteDiffOverrides(_Strict):
    step: float = 1e-5


class NumericsConfig(_Strict):
    quadrature: QuadratureOverrides = Field(default_factory=QuadratureOverrides)
    minimize: MinimizeOverrides = Field(default_factory=MinimizeOverrides)
    finite_diff: FiniteDiffOverrides = Field(default_factory=FiniteDiffOverrides)
    terminal_eps: float = 1e-7


class ProblemConfig(_Strict):
    dim: int = Field(ge=1)
    horizon: float = Field(gt=0)
    lagrangian: LagrangianConfig
    terminal: TerminalConfig
    discount: DiscountConfig
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)

    def resolved(self):
        """Fully defaulted config as plain JSON data."""
        return self.model_dump(mode="json")

    def to_spec(self):
        n, T = self.dim, self.horizon
        lag = self.lagrangian
        if lag.kind == "quadratic":
            ell = convex.quadratic(lag.Q, dim=n)
        else:
            ell = convex.isotropic_power(lag.p, dim=n)

        term = self.terminal
        if term.kind == "linear":
            a = np.full(n, term.a) if isinstance(term.a, float) else term.a
            g = LinearTerminal(a, term.b, lip_const=term.lipschitz)
        else:
            g = PseudoHuberTerminal(term.scale, n, term.center, lip_const=term.lipschitz)
        g.convex = term.convex

        d = self.discount
        if d.kind == "exponential_rate":
            if isinstance(d.rho, RateTable):
                discount = disc.rate_table(d.rho.t, d.rho.values, T)
            else:
                discount = disc.exponential_rate(d.rho, T)
        elif d.k is not None:
            discount = disc.hyperbolic(d.k, T)
        else:
            discount = disc.theta_table(d.theta.tau, d.theta.values, T)

        num = self.numerics
        return ProblemSpec(
            dim=n,
            horizon=T,
            lagrangian=ell,
            terminal=g,
            discount=discount,
            quad=QuadratureConfig(**num.quadrature.model_dump()),
            min_cfg=MinimizeConfig(**num.minimize.model_dump()),
            fd_cfg=FiniteDiffConfig(**num.finite_diff.model_dump()),
            terminal_eps=num.terminal_eps,
        )


def load_config(path):
    """Parse and validate a problem file; raises pydantic ``ValidationError`` or ``OSError``."""
    return ProblemConfig.model_validate(json.loads(Path(path).read_text()))
