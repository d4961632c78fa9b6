"""Shared types and delay bookkeeping.

Conventions used across the package:

* Rounds are 1-indexed: t = 1, ..., T.  A loss generated in round s with
  delay d becomes visible to the learner at the end of round s + d, so a
  delay of zero means same-round feedback.
* Arms are 1-indexed in every public interface (events, actions, CSV
  output).  Numpy arrays indexed by arm are 0-based: position i-1 holds
  the entry for arm i.

The central quantities are, for each arm i and round t,

    available set   S_t(i) = {s : s + d_s(i) <  t}
    missing set     m_t(i) = {s < t : s + d_s(i) >= t}
    missing count   rho_t(i) = |m_t(i)|

so S_t(i) and m_t(i) partition {1, ..., t-1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LossTable",
    "DelaySchedule",
    "FeedbackEvent",
    "DeliveryQueue",
    "MissingTracker",
    "missing_count",
    "missing_count_table",
    "available_set",
    "deliveries_at",
    "update_rho_max",
]


def _check_arm(num_arms: int, arm: int) -> None:
    if not 1 <= arm <= num_arms:
        raise ValueError(f"arm {arm} out of range 1..{num_arms}")


def _check_round(horizon: int, round: int, upper: int) -> None:
    if not 1 <= round <= upper:
        raise ValueError(f"round {round} out of range 1..{upper}")


@dataclass(frozen=True)
class LossTable:
    """Loss matrix with values[t-1, i-1] = loss of arm i in round t, in [0, 1]."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("loss table must be a (T, K) matrix")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("losses must be finite and in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def num_arms(self) -> int:
        return self.values.shape[1]

    def loss(self, round: int, arm: int) -> float:
        _check_round(self.horizon, round, self.horizon)
        _check_arm(self.num_arms, arm)
        return float(self.values[round - 1, arm - 1])

    def row(self, round: int) -> np.ndarray:
        _check_round(self.horizon, round, self.horizon)
        return self.values[round - 1]


@dataclass(frozen=True)
class DelaySchedule:
    """Delay matrix with delays[s-1, i-1] = d_s(i), a nonnegative integer."""

    delays: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.delays)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("delay schedule must be a (T, K) matrix")
        if not np.issubdtype(d.dtype, np.integer):
            if not np.all(d == np.floor(d)):
                raise ValueError("delays must be integers")
            d = d.astype(np.int64)
        if d.min() < 0:
            raise ValueError("delays must be nonnegative")
        object.__setattr__(self, "delays", d.astype(np.int64))

    @property
    def horizon(self) -> int:
        return self.delays.shape[0]

    @property
    def num_arms(self) -> int:
        return self.delays.shape[1]

    def delay(self, round: int, arm: int) -> int:
        _check_round(self.horizon, round, self.horizon)
        _check_arm(self.num_arms, arm)
        return int(self.delays[round - 1, arm - 1])


@dataclass(frozen=True)
class FeedbackEvent:
    """One delivered observation.

    ``missing_count`` carries rho_{origin_round}(arm) when the setting
    reveals it alongside the loss, and None when it does not.
    """

    origin_round: int
    arm: int
    loss: float
    missing_count: int | None = None


class DeliveryQueue:
    """Future feedback keyed by delivery round.

    Events whose delivery round exceeds the horizon are dropped at push
    time and only counted.  ``deliveries_at`` pops the batch for one
    round, ordered by (origin_round, arm).
    """

    def __init__(self, horizon: int):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.horizon = horizon
        self._pending: dict[int, list[FeedbackEvent]] = {}
        self.pushed_total = 0
        self.delivered_total = 0
        self.discarded_total = 0

    def __len__(self) -> int:
        return sum(len(v) for v in self._pending.values())

    def push(self, delivery_round: int, event: FeedbackEvent) -> None:
        if delivery_round < event.origin_round:
            raise ValueError("delivery round precedes origin round")
        self.pushed_total += 1
        if delivery_round > self.horizon:
            self.discarded_total += 1
            return
        self._pending.setdefault(delivery_round, []).append(event)

    def deliveries_at(self, round: int) -> list[FeedbackEvent]:
        _check_round(self.horizon, round, self.horizon)
        batch = self._pending.pop(round, [])
        batch.sort(key=lambda e: (e.origin_round, e.arm))
        self.delivered_total += len(batch)
        return batch


class MissingTracker:
    """Per-arm sets of undelivered origin rounds, maintained incrementally.

    Drive it with one ``advance(t)`` per round in order (origin t-1
    becomes past for every arm) and one ``deliver(s, i)`` per delivered
    event.  Same-round deliveries (delay zero) may arrive before the
    ``advance`` that would register the origin; those origins are
    remembered and never enter the missing sets, matching the definition
    (s + 0 < t for every s < t).
    """

    def __init__(self, num_arms: int):
        if num_arms < 1:
            raise ValueError("num_arms must be >= 1")
        self.num_arms = num_arms
        self.round = 0
        self._missing: list[set[int]] = [set() for _ in range(num_arms)]
        self._early: list[set[int]] = [set() for _ in range(num_arms)]
        self._rho_max = 0

    def advance(self, round: int) -> None:
        if round != self.round + 1:
            raise ValueError(f"advance must be sequential, expected {self.round + 1}")
        self.round = round
        origin = round - 1
        if origin >= 1:
            for i in range(self.num_arms):
                if origin in self._early[i]:
                    self._early[i].discard(origin)
                else:
                    self._missing[i].add(origin)

    def deliver(self, origin_round: int, arm: int) -> None:
        _check_arm(self.num_arms, arm)
        if origin_round < 1 or origin_round > self.round:
            raise ValueError("delivery for a round that has not happened")
        pend = self._missing[arm - 1]
        if origin_round in pend:
            pend.discard(origin_round)
        elif origin_round == self.round and origin_round not in self._early[arm - 1]:
            self._early[arm - 1].add(origin_round)
        else:
            raise ValueError(
                f"duplicate delivery for round {origin_round}, arm {arm}"
            )

    def missing_sets(self) -> list[frozenset[int]]:
        return [frozenset(s) for s in self._missing]

    def count(self, arm: int) -> int:
        _check_arm(self.num_arms, arm)
        return len(self._missing[arm - 1])

    def counts(self) -> np.ndarray:
        return np.array([len(s) for s in self._missing], dtype=np.int64)

    def update_rho_max(self, round: int) -> int:
        if round != self.round:
            raise ValueError("update_rho_max must follow advance for the same round")
        current = max((len(s) for s in self._missing), default=0)
        if current > self._rho_max:
            self._rho_max = current
        return self._rho_max

    @property
    def rho_max(self) -> int:
        return self._rho_max


def missing_count(schedule: DelaySchedule, arm: int, round: int) -> int:
    """rho_round(arm) = |{s < round : s + d_s(arm) >= round}|, by direct scan."""
    _check_arm(schedule.num_arms, arm)
    _check_round(schedule.horizon, round, schedule.horizon + 1)
    col = schedule.delays[:, arm - 1]
    n = 0
    for s in range(1, round):
        if s + int(col[s - 1]) >= round:
            n += 1
    return n


def missing_count_table(schedule: DelaySchedule) -> np.ndarray:
    """Matrix of rho_t(i) for t = 1..T, i = 1..K.

    Uses rho_t(i) = (t-1) - #{s : s + d_s(i) <= t-1}; the subtrahend is a
    cumulative histogram of delivery rounds (s + d_s(i) >= s, so every
    counted s is automatically < t).
    """
    T, K = schedule.delays.shape
    rho = np.empty((T, K), dtype=np.int64)
    rounds = np.arange(1, T + 1)
    for i in range(K):
        ends = np.minimum(rounds + schedule.delays[:, i], T + 1)
        cum = np.cumsum(np.bincount(ends, minlength=T + 2))
        rho[:, i] = (rounds - 1) - cum[rounds - 1]
    return rho


def available_set(schedule: DelaySchedule, arm: int, round: int) -> set[int]:
    """S_round(arm) = {s < round : s + d_s(arm) < round}."""
    _check_arm(schedule.num_arms, arm)
    _check_round(schedule.horizon, round, schedule.horizon + 1)
    col = schedule.delays[:, arm - 1]
    return {s for s in range(1, round) if s + int(col[s - 1]) < round}


def deliveries_at(queue: DeliveryQueue, round: int) -> list[FeedbackEvent]:
    return queue.deliveries_at(round)


def update_rho_max(tracker: MissingTracker, round: int) -> int:
    return tracker.update_rho_max(round)
