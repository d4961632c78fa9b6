"""Oblivious adversaries: loss tables, delay schedules, feedback routing.

Everything random is drawn up front from a single seed, before the first
round, so a scenario is a pure description: the same ``Scenario`` always
yields byte-identical tables.  Loss and delay generation use independent
child streams of the seed, so changing the delay kind never perturbs the
losses.

Routing turns one played round into the feedback events the learner will
eventually see.  The simulator is the only party that reads the tables;
per-setting rules decide what each event carries:

* ``full_info``: one event per arm, each delayed by that arm's own delay,
  carrying the arm's missing count at the origin round;
* ``partially_concealed``: one event for the played arm, carrying its
  origin-round missing count;
* ``concealed``: one event for the played arm, carrying nothing else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DelaySchedule,
    FeedbackEvent,
    LossTable,
    missing_count,
    missing_count_table,
)

LOSS_KINDS = ("constant", "bernoulli_gap", "adversarial_drift")
DELAY_KINDS = ("zero", "constant", "arm_constant", "inverse_loss", "random_bounded")
SETTINGS = ("full_info", "partially_concealed", "concealed")

__all__ = [
    "LOSS_KINDS",
    "DELAY_KINDS",
    "SETTINGS",
    "Scenario",
    "generate",
    "route",
    "realized_rho_star",
]


@dataclass(frozen=True)
class Scenario:
    """A complete, reproducible description of one adversarial environment.

    Parameter fields are read only by the kinds that use them:
    ``loss_value`` by constant losses; ``base_loss``/``loss_gap`` by the
    Bernoulli-gap and drifting adversaries (the best arm's mean is
    ``base_loss``, every other arm's is ``base_loss + loss_gap``);
    ``delay_value`` by constant delays; ``arm_delays`` by per-arm constant
    delays; ``max_delay`` by the loss-inverse and random delay kinds.
    """

    loss_kind: str
    delay_kind: str
    horizon: int
    num_arms: int
    seed: int = 0
    loss_value: float = 0.3
    base_loss: float = 0.2
    loss_gap: float = 0.3
    delay_value: int = 0
    arm_delays: tuple[int, ...] | None = None
    max_delay: int = 0

    def __post_init__(self) -> None:
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss_kind {self.loss_kind!r}; expected one of {LOSS_KINDS}")
        if self.delay_kind not in DELAY_KINDS:
            raise ValueError(
                f"unknown delay_kind {self.delay_kind!r}; expected one of {DELAY_KINDS}"
            )
        if self.horizon < 1 or self.num_arms < 1:
            raise ValueError("horizon and num_arms must be >= 1")
        if not 0.0 <= self.loss_value <= 1.0:
            raise ValueError("loss_value must lie in [0, 1]")
        if self.base_loss < 0.0 or self.loss_gap < 0.0 or self.base_loss + self.loss_gap > 1.0:
            raise ValueError("base_loss and loss_gap must be nonnegative with sum <= 1")
        if self.delay_value < 0 or self.max_delay < 0:
            raise ValueError("delays must be nonnegative")
        if self.delay_kind == "arm_constant":
            if self.arm_delays is None or len(self.arm_delays) != self.num_arms:
                raise ValueError("arm_constant needs one delay per arm")
            if any(d < 0 for d in self.arm_delays):
                raise ValueError("delays must be nonnegative")


def _make_losses(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    T, K = scenario.horizon, scenario.num_arms
    if scenario.loss_kind == "constant":
        return np.full((T, K), scenario.loss_value)
    if scenario.loss_kind == "bernoulli_gap":
        means = np.full(K, scenario.base_loss + scenario.loss_gap)
        means[0] = scenario.base_loss
        return (rng.random((T, K)) < means[None, :]).astype(float)
    # adversarial_drift: the best arm rotates every ceil(T/5) rounds
    block = math.ceil(T / 5)
    losses = np.full((T, K), scenario.base_loss + scenario.loss_gap)
    for t in range(T):
        best = (t // block) % K
        losses[t, best] = scenario.base_loss
    return losses


def _make_delays(
    scenario: Scenario, losses: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    T, K = scenario.horizon, scenario.num_arms
    if scenario.delay_kind == "zero":
        return np.zeros((T, K), dtype=np.int64)
    if scenario.delay_kind == "constant":
        return np.full((T, K), scenario.delay_value, dtype=np.int64)
    if scenario.delay_kind == "arm_constant":
        row = np.asarray(scenario.arm_delays, dtype=np.int64)
        return np.tile(row, (T, 1))
    if scenario.delay_kind == "inverse_loss":
        # cheaper arms sell slower: delay grows as the arm's mean loss falls
        mean_loss = losses.mean(axis=0)
        row = np.ceil(scenario.max_delay * (1.0 - mean_loss)).astype(np.int64)
        return np.tile(row, (T, 1))
    return rng.integers(0, scenario.max_delay + 1, size=(T, K))


def generate(scenario: Scenario) -> tuple[LossTable, DelaySchedule]:
    """Materialize a scenario's loss and delay tables (pure in the scenario)."""
    loss_seq, delay_seq = np.random.SeedSequence(scenario.seed).spawn(2)
    losses = _make_losses(scenario, np.random.default_rng(loss_seq))
    delays = _make_delays(scenario, losses, np.random.default_rng(delay_seq))
    return LossTable(losses), DelaySchedule(delays)


def _missing_at(
    schedule: DelaySchedule,
    arm: int,
    round_index: int,
    missing: np.ndarray | None,
) -> int:
    if missing is not None:
        return int(missing[round_index - 1, arm - 1])
    return missing_count(schedule, arm, round_index)


def route(
    setting: str,
    tables: tuple[LossTable, DelaySchedule],
    round_index: int,
    action: int | None = None,
    missing: np.ndarray | None = None,
) -> list[tuple[int, FeedbackEvent]]:
    """Feedback events generated by playing one round, as
    (delivery_round, event) pairs.

    ``missing`` may carry the precomputed per-(round, arm) missing-count
    table (``core.missing_count_table``) to avoid a per-call scan; the
    schedule itself is the fallback ground truth.
    """
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}")
    loss_table, schedule = tables
    if setting == "full_info":
        if action is not None:
            raise ValueError("full information routing takes no action")
        out = []
        for arm in range(1, loss_table.num_arms + 1):
            event = FeedbackEvent(
                round_index,
                arm,
                loss_table.loss(round_index, arm),
                _missing_at(schedule, arm, round_index, missing),
            )
            out.append((round_index + schedule.delay(round_index, arm), event))
        return out
    if action is None:
        raise ValueError("bandit routing requires the played action")
    loss = loss_table.loss(round_index, action)
    delay = schedule.delay(round_index, action)
    if setting == "partially_concealed":
        event = FeedbackEvent(
            round_index, action, loss, _missing_at(schedule, action, round_index, missing)
        )
    else:
        event = FeedbackEvent(round_index, action, loss)
    return [(round_index + delay, event)]


def realized_rho_star(schedule: DelaySchedule, horizon: int | None = None) -> int:
    """Ground-truth maximum missing count over every (round, arm) pair.

    ``horizon`` defaults to the schedule's own; a shorter horizon restricts
    the maximum to rounds 1..horizon.
    """
    table = missing_count_table(schedule)
    if horizon is not None:
        if not 1 <= horizon <= schedule.horizon:
            raise ValueError("horizon must lie in 1..schedule horizon")
        table = table[:horizon]
    return int(table.max())
