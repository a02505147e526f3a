import numpy as np
import pytest

from hopflax import convex, discount, hopf

ACCEPTANCE_LINES = []


def make_spec(terminal=None, disc=None, lagrangian=None, horizon=1.0, **kw):
    return hopf.ProblemSpec(
        dim=1,
        horizon=horizon,
        lagrangian=lagrangian or convex.quadratic(),
        terminal=terminal or hopf.linear_terminal([1.0]),
        discount=disc or discount.exponential_rate(1.0, horizon),
        **kw,
    )


def closed_form_v(x, t, T=1.0):
    """Exponential rate 1, l = u^2/2, g(x) = x."""
    e = np.exp(-(T - t))
    return e * x - 0.5 * (e - e * e)


@pytest.fixture
def exp_linear():
    return make_spec()


@pytest.fixture
def flat_linear():
    return make_spec(disc=discount.constant_one(1.0))


@pytest.fixture
def hyperbolic_huber():
    return make_spec(terminal=hopf.pseudo_huber(), disc=discount.hyperbolic(1.0, 1.0))


@pytest.fixture
def varying_rate_huber():
    return make_spec(
        terminal=hopf.pseudo_huber(),
        disc=discount.exponential_rate(lambda t: 1.0 + 0.5 * t, 1.0),
    )


@pytest.fixture
def zero_payoff():
    return make_spec(terminal=hopf.zero_terminal(1), disc=discount.hyperbolic(1.0, 1.0))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
