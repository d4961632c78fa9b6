import math

import numpy as np
import pytest

from delaybandits.core import missing_count, missing_count_table
from delaybandits.environments import (
    Scenario,
    generate,
    realized_rho_star,
    route,
)


def test_scenario_validation():
    Scenario("constant", "zero", 10, 3)
    with pytest.raises(ValueError):
        Scenario("gaussian", "zero", 10, 3)
    with pytest.raises(ValueError):
        Scenario("constant", "uniform", 10, 3)
    with pytest.raises(ValueError):
        Scenario("constant", "zero", 0, 3)
    with pytest.raises(ValueError):
        Scenario("constant", "zero", 10, 3, loss_value=1.5)
    with pytest.raises(ValueError):
        Scenario("bernoulli_gap", "zero", 10, 3, base_loss=0.8, loss_gap=0.3)
    with pytest.raises(ValueError):
        Scenario("constant", "arm_constant", 10, 3, arm_delays=(1, 2))
    with pytest.raises(ValueError):
        Scenario("constant", "arm_constant", 10, 3, arm_delays=(1, 2, -1))


def test_generate_deterministic():
    sc = Scenario("bernoulli_gap", "random_bounded", 50, 4, seed=99, max_delay=7)
    first_losses, first_delays = generate(sc)
    second_losses, second_delays = generate(sc)
    assert first_losses.values.tobytes() == second_losses.values.tobytes()
    assert first_delays.delays.tobytes() == second_delays.delays.tobytes()


def test_generate_seed_changes_tables():
    a = generate(Scenario("bernoulli_gap", "random_bounded", 50, 4, seed=1, max_delay=7))
    b = generate(Scenario("bernoulli_gap", "random_bounded", 50, 4, seed=2, max_delay=7))
    assert not np.array_equal(a[0].values, b[0].values)
    assert not np.array_equal(a[1].delays, b[1].delays)


def test_constant_losses_and_zero_delays():
    losses, delays = generate(Scenario("constant", "zero", 6, 2, loss_value=0.3))
    assert np.all(losses.values == 0.3)
    assert np.all(delays.delays == 0)


def test_bernoulli_gap_means():
    sc = Scenario("bernoulli_gap", "zero", 4000, 3, seed=5)
    losses, _ = generate(sc)
    vals = losses.values
    assert set(np.unique(vals)) <= {0.0, 1.0}
    means = vals.mean(axis=0)
    for i, mu in enumerate([0.2, 0.5, 0.5]):
        se = math.sqrt(mu * (1.0 - mu) / 4000)
        assert abs(means[i] - mu) <= 4.0 * se


def test_adversarial_drift_rotates_best_arm():
    sc = Scenario("adversarial_drift", "zero", 20, 3, base_loss=0.2, loss_gap=0.3)
    losses, _ = generate(sc)
    block = math.ceil(20 / 5)
    for t in range(20):
        row = losses.values[t]
        best = (t // block) % 3
        assert row[best] == 0.2
        assert np.all(np.delete(row, best) == 0.5)


def test_arm_constant_delays():
    sc = Scenario("constant", "arm_constant", 5, 3, arm_delays=(0, 2, 4))
    _, delays = generate(sc)
    assert np.all(delays.delays == np.array([0, 2, 4]))


def test_inverse_loss_monotone_mapping():
    sc = Scenario("adversarial_drift", "inverse_loss", 40, 4, max_delay=10)
    losses, delays = generate(sc)
    mean_loss = losses.values.mean(axis=0)
    row = delays.delays[0]
    assert np.all(delays.delays == row)  # constant over rounds
    for i in range(4):
        assert row[i] == math.ceil(10 * (1.0 - mean_loss[i]))
        for j in range(4):
            if mean_loss[i] <= mean_loss[j]:
                assert row[i] >= row[j]


def test_random_bounded_delays_in_range():
    sc = Scenario("constant", "random_bounded", 60, 3, seed=3, max_delay=5)
    _, delays = generate(sc)
    assert delays.delays.min() >= 0
    assert delays.delays.max() <= 5
    assert delays.delays.max() > 0  # would be astronomically unlikely otherwise


def test_realized_rho_star_examples():
    zero = generate(Scenario("constant", "zero", 12, 2))[1]
    assert realized_rho_star(zero) == 0
    const = generate(Scenario("constant", "constant", 12, 2, delay_value=4))[1]
    assert realized_rho_star(const) == 4
    huge = generate(Scenario("constant", "constant", 12, 2, delay_value=100))[1]
    assert realized_rho_star(huge) == 11  # min(T-1, d)
    bounded = generate(Scenario("constant", "random_bounded", 40, 3, seed=7, max_delay=6))[1]
    assert realized_rho_star(bounded) <= 6
    assert realized_rho_star(const, horizon=3) == 2


def test_route_full_info():
    sc = Scenario("bernoulli_gap", "random_bounded", 15, 3, seed=11, max_delay=4)
    tables = generate(sc)
    losses, schedule = tables
    missing = missing_count_table(schedule)
    for t in (1, 5, 15):
        pairs = route("full_info", tables, t, missing=missing)
        assert len(pairs) == 3
        for delivery, event in pairs:
            assert event.origin_round == t
            assert delivery == t + schedule.delay(t, event.arm)
            assert event.loss == losses.loss(t, event.arm)
            assert event.missing_count == missing_count(schedule, event.arm, t)
        assert sorted(e.arm for _, e in pairs) == [1, 2, 3]


def test_route_bandit_settings():
    sc = Scenario("bernoulli_gap", "random_bounded", 15, 3, seed=13, max_delay=4)
    tables = generate(sc)
    losses, schedule = tables
    pairs = route("partially_concealed", tables, 7, action=2)
    assert len(pairs) == 1
    delivery, event = pairs[0]
    assert delivery == 7 + schedule.delay(7, 2)
    assert event.arm == 2 and event.loss == losses.loss(7, 2)
    assert event.missing_count == missing_count(schedule, 2, 7)

    (delivery, event), = route("concealed", tables, 7, action=2)
    assert event.missing_count is None
    assert delivery == 7 + schedule.delay(7, 2)


def test_route_protocol_errors():
    tables = generate(Scenario("constant", "zero", 5, 2))
    with pytest.raises(ValueError):
        route("full_info", tables, 1, action=1)
    with pytest.raises(ValueError):
        route("partially_concealed", tables, 1)
    with pytest.raises(ValueError):
        route("concealed", tables, 1)
    with pytest.raises(ValueError):
        route("bandit", tables, 1, action=1)
    with pytest.raises(ValueError):
        route("concealed", tables, 9, action=1)  # round beyond the table
