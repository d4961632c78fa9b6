import numpy as np
import pytest

from delaybandits.core import (
    DelaySchedule,
    DeliveryQueue,
    FeedbackEvent,
    LossTable,
    MissingTracker,
    available_set,
    deliveries_at,
    missing_count,
    missing_count_table,
    update_rho_max,
)


def random_schedule(rng, T, K, d_max):
    return DelaySchedule(rng.integers(0, d_max + 1, size=(T, K)))


def test_loss_table_validation():
    LossTable(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        LossTable(np.full((3, 2), 1.5))
    with pytest.raises(ValueError):
        LossTable(np.array([[0.1, np.nan]]))
    with pytest.raises(ValueError):
        LossTable(np.zeros(3))


def test_loss_table_accessors():
    tab = LossTable(np.array([[0.1, 0.2], [0.3, 0.4]]))
    assert tab.horizon == 2 and tab.num_arms == 2
    assert tab.loss(2, 1) == 0.3
    with pytest.raises(ValueError):
        tab.loss(0, 1)
    with pytest.raises(ValueError):
        tab.loss(1, 3)


def test_delay_schedule_validation():
    DelaySchedule(np.zeros((2, 2), dtype=int))
    with pytest.raises(ValueError):
        DelaySchedule(np.array([[-1, 0]]))
    with pytest.raises(ValueError):
        DelaySchedule(np.array([[0.5, 0.0]]))
    assert DelaySchedule(np.array([[2.0, 3.0]])).delay(1, 2) == 3


def test_missing_count_example():
    # delays (5, 0, 1) for the single arm; at round 4 only round 2 arrived
    sched = DelaySchedule(np.array([[5], [0], [1]]))
    assert missing_count(sched, 1, 4) == 2
    assert available_set(sched, 1, 4) == {2}


def test_missing_count_zero_delay():
    sched = DelaySchedule(np.zeros((6, 3), dtype=int))
    for t in range(1, 8):
        for arm in (1, 2, 3):
            assert missing_count(sched, arm, t) == 0
            assert available_set(sched, arm, t) == set(range(1, t))


def test_available_and_missing_partition_past():
    rng = np.random.default_rng(0)
    for trial in range(25):
        T, K = 12, 3
        sched = random_schedule(rng, T, K, 6)
        for t in range(1, T + 2):
            for arm in range(1, K + 1):
                avail = available_set(sched, arm, t)
                rho = missing_count(sched, arm, t)
                assert len(avail) + rho == t - 1
                assert all(1 <= s < t for s in avail)


def test_missing_count_table_matches_scan():
    rng = np.random.default_rng(1)
    for trial in range(20):
        T = int(rng.integers(1, 30))
        K = int(rng.integers(1, 5))
        sched = random_schedule(rng, T, K, 8)
        table = missing_count_table(sched)
        assert table.shape == (T, K)
        for t in range(1, T + 1):
            for arm in range(1, K + 1):
                assert table[t - 1, arm - 1] == missing_count(sched, arm, t)


def test_missing_count_argument_errors():
    sched = DelaySchedule(np.zeros((3, 2), dtype=int))
    with pytest.raises(ValueError):
        missing_count(sched, 0, 1)
    with pytest.raises(ValueError):
        missing_count(sched, 3, 1)
    with pytest.raises(ValueError):
        missing_count(sched, 1, 0)
    with pytest.raises(ValueError):
        missing_count(sched, 1, 5)  # past T+1


def test_delivery_queue_order_and_pop():
    q = DeliveryQueue(horizon=10)
    q.push(6, FeedbackEvent(5, 1, 0.3))
    q.push(6, FeedbackEvent(2, 1, 0.1))
    q.push(7, FeedbackEvent(1, 1, 0.9))
    batch = q.deliveries_at(6)
    assert [e.origin_round for e in batch] == [2, 5]
    assert q.deliveries_at(6) == []  # popped, not repeated
    assert [e.origin_round for e in q.deliveries_at(7)] == [1]


def test_delivery_queue_tie_break_by_arm():
    q = DeliveryQueue(horizon=5)
    q.push(3, FeedbackEvent(2, 2, 0.0))
    q.push(3, FeedbackEvent(2, 1, 0.0))
    q.push(3, FeedbackEvent(1, 3, 0.0))
    batch = q.deliveries_at(3)
    assert [(e.origin_round, e.arm) for e in batch] == [(1, 3), (2, 1), (2, 2)]


def test_delivery_queue_discards_past_horizon():
    q = DeliveryQueue(horizon=4)
    q.push(5, FeedbackEvent(4, 1, 0.2))
    q.push(4, FeedbackEvent(4, 1, 0.2))
    assert q.discarded_total == 1
    assert len(q) == 1
    assert len(q.deliveries_at(4)) == 1
    assert q.pushed_total == q.delivered_total + q.discarded_total + len(q)


def test_delivery_queue_accounting_random():
    rng = np.random.default_rng(2)
    q = DeliveryQueue(horizon=30)
    for _ in range(200):
        s = int(rng.integers(1, 31))
        d = int(rng.integers(0, 15))
        q.push(s + d, FeedbackEvent(s, 1, 0.0))
    delivered = sum(len(q.deliveries_at(t)) for t in range(1, 31))
    assert q.pushed_total == 200
    assert delivered + q.discarded_total + len(q) == 200
    assert len(q) == 0  # every kept event was popped


def test_delivery_queue_rejects_bad_delivery_round():
    q = DeliveryQueue(horizon=5)
    with pytest.raises(ValueError):
        q.push(2, FeedbackEvent(3, 1, 0.0))


def test_tracker_matches_definition_on_random_schedules():
    rng = np.random.default_rng(3)
    for trial in range(15):
        T, K = 25, 3
        sched = random_schedule(rng, T, K, 7)
        tracker = MissingTracker(K)
        running = 0
        for t in range(1, T + 1):
            tracker.advance(t)
            for arm in range(1, K + 1):
                assert tracker.count(arm) == missing_count(sched, arm, t)
            running = max(
                running,
                max(missing_count(sched, a, t) for a in range(1, K + 1)),
            )
            assert update_rho_max(tracker, t) == running
            # end of round t: deliver everything scheduled for t
            for s in range(1, t + 1):
                for arm in range(1, K + 1):
                    if s + sched.delay(s, arm) == t:
                        tracker.deliver(s, arm)


def test_tracker_zero_delay_early_delivery():
    tracker = MissingTracker(2)
    tracker.advance(1)
    tracker.deliver(1, 1)  # same-round delivery before round 2's advance
    tracker.advance(2)
    assert tracker.count(1) == 0
    assert tracker.count(2) == 1


def test_tracker_protocol_errors():
    tracker = MissingTracker(2)
    tracker.advance(1)
    with pytest.raises(ValueError):
        tracker.advance(3)
    with pytest.raises(ValueError):
        tracker.deliver(2, 1)  # future round
    tracker.deliver(1, 1)
    with pytest.raises(ValueError):
        tracker.deliver(1, 1)  # duplicate


def test_deliveries_at_function_alias():
    q = DeliveryQueue(horizon=3)
    q.push(2, FeedbackEvent(1, 1, 0.5))
    assert deliveries_at(q, 2)[0].loss == 0.5
