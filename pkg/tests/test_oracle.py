"""Oracle tests: closed forms, finite differences, drift replay, baselines."""

import math

import numpy as np
import pytest

from delaybandits.environments import Scenario, generate
from delaybandits.harness import EpisodeTrace, best_arm, regret
from delaybandits.oracle import (
    OracleReport,
    brute_force_regret,
    derivative_battery,
    drift_battery,
    drift_check,
    drift_instances,
    estimator_battery,
    finite_difference,
    hedge_closed_form,
    hedge_equivalence_battery,
    importance_weighted_hedge,
    iw_hedge_regrets,
    kl_divergence,
    solver_battery,
)


def test_oracle_report_pass_invariant():
    assert OracleReport("x", 10, 1e-9, 1e-8).passed
    assert not OracleReport("x", 10, 2e-8, 1e-8).passed
    assert "PASS" in OracleReport("x", 1, 0.0, 1e-8).line()
    assert "FAIL" in OracleReport("x", 1, 1.0, 1e-8).line()


# ---------------------------------------------------------------------------
# closed forms and finite differences
# ---------------------------------------------------------------------------


def test_hedge_closed_form_examples():
    prior = np.array([0.3, 0.7])
    np.testing.assert_allclose(
        hedge_closed_form(prior, 0.8, np.zeros(2)), prior, atol=1e-15
    )
    out = hedge_closed_form(np.array([0.5, 0.5]), 1.0, np.array([0.0, 1.0]))
    np.testing.assert_allclose(out, [0.73106, 0.26894], atol=5e-6)
    # shifting all losses by a constant changes nothing
    shifted = hedge_closed_form(prior, 0.8, np.array([2.0, 3.5]) + 17.0)
    np.testing.assert_allclose(
        shifted, hedge_closed_form(prior, 0.8, np.array([2.0, 3.5])), atol=1e-12
    )


def test_finite_difference_linear_is_exact():
    slope = np.array([2.0, -3.0, 0.5])
    fd = finite_difference(lambda x: float(slope @ x), np.array([0.3, 0.2, 0.5]))
    np.testing.assert_allclose(fd, slope, atol=1e-9)


def test_finite_difference_quadratic_hessian_vector_product():
    rng = np.random.default_rng(11)
    root = rng.normal(size=(4, 4))
    hess = root @ root.T + 4.0 * np.eye(4)
    fn = lambda x: 0.5 * float(x @ hess @ x)
    x = rng.uniform(0.1, 1.0, size=4)
    v = rng.normal(size=4)
    step = 1e-4
    hvp = (
        finite_difference(fn, x + step * v) - finite_difference(fn, x - step * v)
    ) / (2.0 * step)
    np.testing.assert_allclose(hvp, hess @ v, rtol=1e-6, atol=1e-6)


def test_kl_divergence_values():
    uniform = np.full(4, 0.25)
    vertex = np.array([1.0, 0.0, 0.0, 0.0])
    assert kl_divergence(vertex, uniform) == pytest.approx(math.log(4))
    assert kl_divergence(uniform, uniform) == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------------------
# drift replay
# ---------------------------------------------------------------------------


def test_drift_check_zero_estimate_is_exactly_tight():
    rng = np.random.default_rng(5)
    inst = drift_instances("full_info", rng, 1)[0]
    zeroed = type(inst)(
        regularizer=inst.regularizer,
        available=inst.available,
        own_estimate=np.zeros_like(inst.own_estimate),
        pending_mass=np.zeros_like(inst.pending_mass),
        available_result=inst.available_result,
        identity_deviation=0.0,
    )
    report = drift_check(zeroed)
    assert report.details["lhs"] == 0.0
    assert report.details["rhs"] == 0.0
    assert report.passed


def test_drift_no_missing_mass_matches_diagonal_rhs():
    # zero delays: pending mass vanishes and the weighted-entropy Hessian
    # is diagonal, so the bound reduces to sum_i own_i^2 * rate_i * p_i
    rng = np.random.default_rng(6)
    scenario = Scenario(
        "bernoulli_gap", "zero", 24, 3, seed=17, base_loss=0.2, loss_gap=0.4
    )
    from delaybandits.oracle import _drift_episode

    checked = 0
    for inst in _drift_episode("full_info", scenario, rng):
        assert np.all(inst.pending_mass == 0.0)
        report = drift_check(inst)
        assert report.passed
        rates = inst.regularizer.psi.rates
        p = inst.available_result.distribution
        diagonal_rhs = float(np.sum(inst.own_estimate**2 * rates * p))
        assert report.details["rhs"] == pytest.approx(diagonal_rhs, rel=1e-9, abs=1e-12)
        checked += 1
    assert checked == 24


def test_drift_instances_expose_reachable_state_shapes():
    rng = np.random.default_rng(7)
    for setting, per_arm in (("full_info", None), ("concealed", 1)):
        batch = drift_instances(setting, rng, 30)
        assert len(batch) == 30
        for inst in batch:
            assert inst.available.shape == inst.own_estimate.shape
            assert inst.pending_mass.shape == inst.own_estimate.shape
            assert np.all(inst.own_estimate >= 0.0)
            assert np.all(inst.pending_mass >= 0.0)
            assert inst.identity_deviation <= 1e-9


def test_drift_battery_small_scale():
    reports = drift_battery(instances_per_learner=150, seed=41)
    assert len(reports) == 6
    for report in reports:
        assert report.passed, report.line()
        assert report.instances == 150
    drift_reports = [r for r in reports if "drift" in r.name]
    assert all(r.details["skipped"] == 0 for r in drift_reports)
    assert all(r.details["identity_deviation"] <= 1e-12 for r in drift_reports)


# ---------------------------------------------------------------------------
# brute-force regret
# ---------------------------------------------------------------------------


def _trace_from(loss_values, marginals, incurred):
    loss_values = np.asarray(loss_values, dtype=float)
    horizon, num_arms = loss_values.shape
    return EpisodeTrace(
        setting="full_info",
        seed=1,
        horizon=horizon,
        num_arms=num_arms,
        marginals=np.asarray(marginals, dtype=float),
        actions=np.zeros(horizon, dtype=np.int64),
        incurred=np.asarray(incurred, dtype=float),
        loss_values=loss_values,
        arm_losses=loss_values.sum(axis=0),
        weighted_losses=np.zeros(num_arms),
        delay_mass=0.0,
        rho_max=0,
        delivered_counts=np.zeros(horizon, dtype=np.int64),
        discarded=0,
    )


def test_brute_force_regret_hand_examples():
    # single arm: regret is just incurred minus that arm's total
    single = _trace_from([[0.4], [0.2]], [[1.0], [1.0]], [0.4, 0.2])
    assert brute_force_regret(single.loss_values, single) == (1, pytest.approx(0.0))
    # the 2x2 hand instance
    hand = _trace_from(
        [[0.0, 1.0], [0.0, 1.0]], np.full((2, 2), 0.5), [0.5, 0.5]
    )
    arm, value = brute_force_regret(hand.loss_values, hand)
    assert arm == 1
    assert value == pytest.approx(1.0)


def test_brute_force_agrees_with_harness_regret():
    # the oracle's fsum accumulation is correctly rounded; the harness's
    # vectorized sums must agree to rounding accuracy, arm choice exactly
    rng = np.random.default_rng(23)
    for _ in range(100):
        horizon = int(rng.integers(1, 61))
        num_arms = int(rng.integers(1, 6))
        loss_values = rng.uniform(0.0, 1.0, size=(horizon, num_arms))
        marginals = rng.uniform(0.1, 1.0, size=(horizon, num_arms))
        marginals /= marginals.sum(axis=1, keepdims=True)
        incurred = rng.uniform(0.0, 1.0, size=horizon)
        trace = _trace_from(loss_values, marginals, incurred)
        arm, value = brute_force_regret(loss_values, trace)
        assert arm == best_arm(trace.arm_losses)
        assert value == pytest.approx(regret(trace, arm), abs=1e-11)


# ---------------------------------------------------------------------------
# no-delay baseline
# ---------------------------------------------------------------------------


def test_importance_weighted_hedge_baseline():
    losses, _ = generate(Scenario("bernoulli_gap", "zero", 400, 3, seed=31))
    incurred_a = importance_weighted_hedge(losses.values, seed=5)
    incurred_b = importance_weighted_hedge(losses.values, seed=5)
    np.testing.assert_array_equal(incurred_a, incurred_b)
    assert incurred_a.shape == (400,)
    assert np.all((incurred_a >= 0.0) & (incurred_a <= 1.0))
    regrets = iw_hedge_regrets(losses.values, range(1, 9))
    # learns the 0.3 gap: far better than the worst arm, noise can push
    # a seed slightly below zero
    assert regrets.mean() < 0.3 * 400 * 0.5
    assert regrets.mean() > -20.0


# ---------------------------------------------------------------------------
# reduced-scale batteries (full scale runs in the acceptance module)
# ---------------------------------------------------------------------------


def test_solver_battery_reduced():
    for report in solver_battery(instances_per_family=40, seed=13):
        assert report.passed, report.line()


def test_hedge_equivalence_battery_reduced():
    report = hedge_equivalence_battery(triples=40, seed=14)
    assert report.passed, report.line()


def test_derivative_battery_reduced():
    for report in derivative_battery(points=40, seed=15):
        assert report.passed, report.line()


def test_estimator_battery_reduced():
    reports = estimator_battery(draws=20_000, seed=16)
    for report in reports:
        assert report.passed, report.line()
    assert reports[1].max_violation <= 0.0
