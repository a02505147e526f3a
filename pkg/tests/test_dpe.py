import numpy as np
import pytest

from hopflax import discount, dpe, hopf

from conftest import make_spec

E1 = np.exp(-1.0)


def test_w_term_examples(exp_linear, flat_linear, zero_payoff):
    assert dpe.w_term(exp_linear, [0.0], 0.0, [-E1]) == pytest.approx(-0.1162721, abs=1e-7)
    for a in (-1.0, 0.0, 2.0):
        assert dpe.w_term(flat_linear, [0.4], 0.3, [a]) == 0.0
    assert dpe.w_term(zero_payoff, [0.4], 0.3, [0.0]) == 0.0


def test_w_term_reduces_to_rate_times_objective(varying_rate_huber):
    rng = np.random.default_rng(5)
    for _ in range(50):
        x, t, a = rng.uniform(-2, 2), rng.uniform(0, 0.95), rng.uniform(-2, 2)
        gap, size = dpe.exponential_reduction_gap(varying_rate_huber, [x], t, [a])
        assert gap <= 1e-8 * (1 + size)


def test_w_term_at_minimizer_equals_rate_times_value(varying_rate_huber):
    sol = hopf.hopf_lax_value(varying_rate_huber, [0.2], 0.4)
    w = dpe.w_term(varying_rate_huber, [0.2], 0.4, sol.alpha)
    assert w == pytest.approx(1.2 * sol.v, abs=1e-12)


def test_w_tail_examples(exp_linear, flat_linear, hyperbolic_huber):
    assert dpe.w_tail(flat_linear, 0.1, 0.6, [0.3]) == pytest.approx(0.0, abs=1e-15)
    v_half = -0.5 * (np.exp(-0.5) - E1)
    assert v_half == pytest.approx(-0.1193256, abs=1e-7)
    W = dpe.w_tail(exp_linear, 0.0, 0.5, [0.0])
    assert W == pytest.approx((np.exp(-0.5) - 1) * v_half, abs=1e-12)
    assert W == pytest.approx(0.0469513, abs=1e-6)
    for spec in (exp_linear, hyperbolic_huber):
        assert abs(dpe.w_tail(spec, 0.3, 0.3 + 1e-4, [0.5])) <= 1e-3


def test_w_tail_at_horizon(hyperbolic_huber):
    y = np.array([0.8])
    W = dpe.w_tail(hyperbolic_huber, 0.2, 1.0, y)
    assert W == pytest.approx((1 / 1.8 - 1) * float(hyperbolic_huber.terminal.value(y)), abs=1e-15)


@pytest.mark.parametrize("fixture", ["exp_linear", "flat_linear", "varying_rate_huber"])
@pytest.mark.parametrize("frac", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_dp_identity_holds_for_multiplicative_discounts(fixture, frac, request):
    spec = request.getfixturevalue(fixture)
    t = 0.2
    tau = t + frac * (spec.horizon - t)
    assert abs(dpe.dp_identity_residual(spec, [0.3], t, tau)) <= 1e-5


def test_dp_identity_at_horizon(exp_linear):
    assert abs(dpe.dp_identity_residual(exp_linear, [0.3], 0.2, 1.0)) <= 1e-9


@pytest.mark.parametrize("fixture", ["exp_linear", "hyperbolic_huber"])
def test_perturbed_head_arc_never_beats_the_value(fixture, request):
    spec = request.getfixturevalue(fixture)
    x, t, tau = np.array([0.3]), 0.1, 0.6
    sol = hopf.hopf_lax_value(spec, x, t)
    for amp in (0.05, -0.2, 0.5):
        def velocity(s, amp=amp):
            return hopf.control_profile(spec, t, sol.alpha, s) + amp * np.sin(3 * s)[:, None]
        assert dpe.dp_identity_residual(spec, x, t, tau, velocity=velocity) <= 1e-9


def test_dp_identity_is_only_an_inequality_for_hyperbolic(hyperbolic_huber):
    # the generation at tau re-optimizes the tail, so the bracket is strictly larger
    linear = make_spec(disc=discount.hyperbolic(1.0, 1.0))
    assert dpe.dp_identity_residual(linear, [0.0], 0.0, 0.5) < -1e-4
    assert dpe.dp_identity_residual(hyperbolic_huber, [2.0], 0.0, 0.5) < -1e-4


def test_dp_residual_examples(exp_linear, flat_linear):
    rep = dpe.dp_residual(exp_linear, [0.3], 0.4)
    assert abs(rep.residual) <= 1e-3
    assert rep.derivative_source == "finite-diff"
    tau = 0.6
    assert rep.v_t == pytest.approx(np.exp(-tau) * 0.3 - 0.5 * (np.exp(-tau) - 2 * np.exp(-2 * tau)), abs=1e-6)
    rep = dpe.dp_residual(flat_linear, [0.3], 0.4)
    assert rep.w_value == 0.0 and abs(rep.residual) <= 1e-3


def test_dp_residual_on_hyperbolic_grid(hyperbolic_huber):
    for t in (0.2, 0.5, 0.8):
        for x in (-1.0, 0.0, 1.0):
            for source in ("finite-diff", "envelope"):
                rep = dpe.dp_residual(hyperbolic_huber, [x], t, source)
                assert abs(rep.residual) <= 1e-3
                assert abs(rep.recomputed(hyperbolic_huber.lagrangian) - rep.residual) <= 1e-12


def test_dissipation_residual_examples(exp_linear, varying_rate_huber):
    assert abs(dpe.dissipation_residual(exp_linear, [0.0], 0.5)) <= 1e-3
    zero = make_spec(terminal=hopf.zero_terminal(1))
    assert dpe.dissipation_residual(zero, [0.5], 0.5) == pytest.approx(0.0, abs=1e-15)
    for t in (0.25, 0.5, 0.75):
        for x in (-0.5, 0.0, 0.5):
            diss = dpe.dissipation_residual(varying_rate_huber, [x], t)
            rep = dpe.dp_residual(varying_rate_huber, [x], t)
            assert abs(diss) <= 1e-3
            assert abs(diss - rep.residual) <= 1e-6


def test_dissipation_residual_requires_exponential_rate(hyperbolic_huber):
    with pytest.raises(dpe.DomainError):
        dpe.dissipation_residual(hyperbolic_huber, [0.0], 0.5)


@pytest.mark.parametrize("fixture", ["hyperbolic_huber", "varying_rate_huber"])
def test_minimizer_recovered_from_value_gradient(fixture, request):
    spec = request.getfixturevalue(fixture)
    for x, t in ((-0.7, 0.3), (0.4, 0.6)):
        _, v_x, _, sol = dpe.value_derivatives(spec, [x], t)
        assert abs(float(dpe.convex.iota(spec.lagrangian, -v_x)[0]) - float(sol.alpha[0])) <= 1e-4


def test_foc_residual_examples(exp_linear):
    assert dpe.foc_residual(exp_linear, [0.0], 0.0, [-E1]) <= 1e-10
    assert dpe.foc_residual(exp_linear, [0.0], 0.0, [0.0]) == pytest.approx(E1, abs=1e-15)
    zero = make_spec(terminal=hopf.zero_terminal(1))
    assert dpe.foc_residual(zero, [0.0], 0.0, [0.0]) == 0.0


def test_residual_points_near_boundary_rejected(exp_linear):
    with pytest.raises(dpe.DomainError):
        dpe.dp_residual(exp_linear, [0.0], 0.0)
    with pytest.raises(dpe.DomainError):
        dpe.dp_identity_residual(exp_linear, [0.0], 0.5, 0.5)
    with pytest.raises(dpe.DomainError):
        dpe.value_derivatives(exp_linear, [0.0], 0.5, source="spline")


def test_elapsed_time_table_discount_residual():
    spec = make_spec(terminal=hopf.pseudo_huber(),
                     disc=discount.theta_table([0.0, 1.0], [1.0, 0.6], 1.0))
    assert abs(dpe.dp_residual(spec, [0.2], 0.5).residual) <= 1e-3
