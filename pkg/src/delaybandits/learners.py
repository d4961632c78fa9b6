"""Three delayed-feedback learners sharing one follow-the-regularized-leader
skeleton.

Each learner keeps a vector of cumulative corrected loss estimates over its
decision coordinates and, once per round, solves

    p_t = argmin_{p in simplex} <p, totals + offset> + F(p)

for a setting-specific regularizer F, where the offset makes a zero history
reproduce the prior.  Feedback arrives out of order: the caller pushes each
round's events through ``absorb`` whenever the environment delivers them,
and every estimate carries a correction term sized by how much feedback was
still outstanding when the loss was incurred.

* ``FullInformationLearner`` sees the whole loss vector (eventually).  It
  runs a grid of entropy learning rates per arm, one pseudo-expert per
  (arm, rate) pair, and corrects each delivered loss by
  ``4 * rate * (1 + missing_count)``.
* ``PartiallyConcealedLearner`` sees only the played arm's loss but is told
  how much of its own feedback was outstanding at the origin round.  It
  runs a log barrier over the arm marginals (time-varying rate) plus a
  per-column entropy grid, importance-weights the observed loss by the
  origin-round marginal, and corrects by ``4 * rate * missing_count``.
* ``ConcealedLearner`` sees only the played arm's loss and nothing about
  delays.  It runs a Tsallis-plus-entropy hybrid with schedule-driven
  rates, smooths the importance weight by an exploration floor, and uses
  no corrections at all; the entropy rate instead shrinks with an
  importance-weighted count of the played arm's still-pending plays.

Rounds and arms are 1-indexed in the public API.  Flat coordinates over
(arm, rate) pairs are arm-major, matching ``regularizers.flat_index``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import FeedbackEvent, MissingTracker
from .regularizers import (
    HybridRegularizer,
    LogBarrierOverMarginals,
    PerRateNegEntropy,
    TsallisEntropyHybrid,
    WeightedNegEntropy,
    ZeroRegularizer,
)
from .solver import SolveResult, solve

__all__ = [
    "RateGrid",
    "Prediction",
    "FullInformationLearner",
    "PartiallyConcealedLearner",
    "ConcealedLearner",
    "full_information_grid",
    "partially_concealed_grid",
    "loss_estimate",
    "rate_count",
]


def rate_count(horizon: int) -> int:
    """Number of learning rates in a grid: ceil(log2(sqrt(horizon))), at least 1."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return max(1, math.ceil(0.5 * math.log2(horizon)))


@dataclass(frozen=True, eq=False)
class RateGrid:
    """A geometric grid of learning rates, largest first.

    ``snapshot_round`` is set when the grid was recomputed for a specific
    round (the full information grid shrinks as the running missing-count
    maximum grows); None for the static bandit grid.
    """

    count: int
    rates: np.ndarray
    snapshot_round: int | None = None

    def __post_init__(self) -> None:
        r = np.asarray(self.rates, dtype=float)
        if self.count < 1 or r.shape != (self.count,):
            raise ValueError("count must be >= 1 and match the rates vector")
        if not np.all(np.isfinite(r)) or r.min() <= 0.0:
            raise ValueError("rates must be positive and finite")
        if np.any(np.diff(r) > 0.0):
            raise ValueError("rates must be nonincreasing")
        object.__setattr__(self, "rates", r)


def full_information_grid(
    round_index: int, rho_max: int, num_arms: int, horizon: int
) -> RateGrid:
    """Entropy-rate grid for the full information learner at one round.

    rate_j = min(1/(4(1+rho_max)), sqrt(ln K + 2(ln T + 1)) / (4 sqrt(1+rho_max) 2^j))
    for j = 1..count; the cap keeps every corrected loss at most twice the
    raw loss.
    """
    if num_arms < 2:
        raise ValueError("num_arms must be >= 2")
    if round_index < 1 or round_index > horizon:
        raise ValueError("round_index must lie in 1..horizon")
    if rho_max < 0:
        raise ValueError("rho_max must be >= 0")
    count = rate_count(horizon)
    cap = 1.0 / (4.0 * (1.0 + rho_max))
    scale = math.sqrt(math.log(num_arms) + 2.0 * (math.log(horizon) + 1.0)) / (
        4.0 * math.sqrt(1.0 + rho_max)
    )
    steps = np.arange(1, count + 1, dtype=float)
    rates = np.minimum(cap, scale / 2.0**steps)
    return RateGrid(count=count, rates=rates, snapshot_round=round_index)


def partially_concealed_grid(num_arms: int, horizon: int, rho_star: float) -> RateGrid:
    """Static per-column entropy-rate grid for the partially concealed learner.

    rate_j = min(1/(4 rho_star), sqrt(ln K + ln T + 1) / (4 sqrt(rho_star) 2^j)),
    j = 1..count.
    """
    if num_arms < 2:
        raise ValueError("num_arms must be >= 2")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    _check_rho_star(rho_star)
    count = rate_count(horizon)
    cap = 1.0 / (4.0 * rho_star)
    scale = math.sqrt(math.log(num_arms) + math.log(horizon) + 1.0) / (
        4.0 * math.sqrt(rho_star)
    )
    steps = np.arange(1, count + 1, dtype=float)
    rates = np.minimum(cap, scale / 2.0**steps)
    return RateGrid(count=count, rates=rates, snapshot_round=None)


def loss_estimate(played: int, arm: int, q: float, epsilon: float, loss: float) -> float:
    """Importance-weighted loss estimate 1[played == arm] * loss / (q + epsilon)."""
    if not (0.0 < q <= 1.0):
        raise ValueError("q must lie in (0, 1]")
    if epsilon < 0.0 or not np.isfinite(epsilon):
        raise ValueError("epsilon must be >= 0 and finite")
    if q + epsilon <= 0.0:
        raise ValueError("q + epsilon must be positive")
    _check_loss(loss)
    if played != arm:
        return 0.0
    return loss / (q + epsilon)


@dataclass(frozen=True, eq=False)
class Prediction:
    """One round's decision, with enough context to audit the solve.

    ``distribution`` lives on the enlarged (arm, rate) coordinates and
    ``marginals`` is its per-arm sum; for the concealed learner the two
    coincide.  ``action`` is the sampled arm in the bandit settings and
    None under full information.  ``shifted_loss`` is the exact vector the
    round's solve minimized against along with ``regularizer``; together
    with ``result`` they let a verification harness replay or look ahead
    from this round without touching learner internals.
    """

    round_index: int
    distribution: np.ndarray
    marginals: np.ndarray
    action: int | None
    regularizer: HybridRegularizer
    shifted_loss: np.ndarray
    result: SolveResult
    grid: RateGrid | None = None
    epsilon: float | None = None


def _check_loss(loss: float) -> float:
    loss = float(loss)
    if not np.isfinite(loss) or loss < 0.0 or loss > 1.0:
        raise ValueError("loss must lie in [0, 1]")
    return loss


def _check_rho_star(rho_star: float) -> float:
    rho_star = float(rho_star)
    if not np.isfinite(rho_star) or rho_star < 1.0:
        raise ValueError("rho_star must be finite and >= 1")
    return rho_star


def _check_arm_prior(prior, num_arms: int) -> np.ndarray:
    if prior is None:
        return np.full(num_arms, 1.0 / num_arms)
    prior = np.asarray(prior, dtype=float)
    if prior.shape != (num_arms,):
        raise ValueError(f"prior must be a vector of length {num_arms}")
    if not np.all(np.isfinite(prior)) or prior.min() <= 0.0:
        raise ValueError("prior weights must be positive and finite")
    if abs(prior.sum() - 1.0) > 1e-9:
        raise ValueError("prior must sum to 1")
    return prior


def _rate_weights(count: int) -> np.ndarray:
    # one prior weight per rate index, proportional to 4^-j
    w = 0.25 ** np.arange(1, count + 1, dtype=float)
    return w / w.sum()


def _sample(weights: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a nonnegative weight vector; returns a 1-indexed arm."""
    cdf = np.cumsum(weights)
    draw = rng.random() * cdf[-1]
    index = int(np.searchsorted(cdf, draw, side="right"))
    return min(index, weights.size - 1) + 1


class FullInformationLearner:
    """Delayed full information: every arm's loss eventually arrives.

    One pseudo-expert per (arm, rate) pair.  The rate grid is recomputed
    each round from the running maximum of the per-arm missing counts,
    which the learner tracks itself from the deliveries it sees, and a
    snapshot is kept so late feedback is corrected with its origin round's
    rates.  Events must carry ``missing_count`` measured at their origin
    round.
    """

    def __init__(self, num_arms: int, horizon: int, prior=None):
        if num_arms < 2:
            raise ValueError("num_arms must be >= 2")
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.num_arms = num_arms
        self.horizon = horizon
        self.rates_per_arm = rate_count(horizon)
        self.arm_prior = _check_arm_prior(prior, num_arms)
        self._prior_flat = np.outer(
            self.arm_prior, _rate_weights(self.rates_per_arm)
        ).ravel()
        self._totals = np.zeros(num_arms * self.rates_per_arm)
        self._tracker = MissingTracker(num_arms)
        self._grids: dict[int, RateGrid] = {}
        self._round = 0
        self._warm: SolveResult | None = None

    @property
    def round_index(self) -> int:
        """Rounds predicted so far."""
        return self._round

    @property
    def totals(self) -> np.ndarray:
        """Cumulative corrected losses folded in so far (copy)."""
        return self._totals.copy()

    def grid_for(self, round_index: int) -> RateGrid:
        """The rate grid snapshot taken at a predicted round."""
        try:
            return self._grids[round_index]
        except KeyError:
            raise ValueError(f"no grid snapshot for round {round_index}") from None

    def predict(self) -> Prediction:
        t = self._round + 1
        if t > self.horizon:
            raise ValueError("the horizon is exhausted")
        self._tracker.advance(t)
        rho_max = self._tracker.update_rho_max(t)
        grid = full_information_grid(t, rho_max, self.num_arms, self.horizon)
        self._grids[t] = grid
        reg = HybridRegularizer(
            WeightedNegEntropy(np.tile(grid.rates, self.num_arms)),
            ZeroRegularizer(self._totals.size),
            self._prior_flat,
        )
        z = self._totals + reg.loss_offset()
        res = solve(z, reg, warm=self._warm)
        self._warm = res
        marginals = res.distribution.reshape(self.num_arms, self.rates_per_arm).sum(axis=1)
        self._round = t
        return Prediction(
            round_index=t,
            distribution=res.distribution,
            marginals=marginals,
            action=None,
            regularizer=reg,
            shifted_loss=z,
            result=res,
            grid=grid,
        )

    def absorb(self, events) -> None:
        for event in events:
            self._absorb_one(event)

    def _absorb_one(self, event: FeedbackEvent) -> None:
        if not 1 <= event.arm <= self.num_arms:
            raise ValueError(f"arm {event.arm} out of range")
        grid = self._grids.get(event.origin_round)
        if grid is None:
            raise ValueError(
                f"feedback for round {event.origin_round}, which was never predicted"
            )
        if event.missing_count is None:
            raise ValueError(
                "full information feedback must carry the origin-round missing count"
            )
        loss = _check_loss(event.loss)
        self._tracker.deliver(event.origin_round, event.arm)
        increment = loss * (1.0 + 4.0 * grid.rates * (1.0 + event.missing_count))
        start = (event.arm - 1) * self.rates_per_arm
        self._totals[start : start + self.rates_per_arm] += increment


class PartiallyConcealedLearner:
    """Delayed bandit that is told, with each loss, how much of its own
    feedback was outstanding when that loss was incurred.

    One pseudo-expert per (arm, rate) pair with a static rate grid; the
    barrier rate over the arm marginals grows with the observed losses
    delivered so far.  ``rho_star`` must upper-bound every realized
    missing count.
    """

    def __init__(self, num_arms: int, horizon: int, rho_star: float, prior=None):
        if num_arms < 2:
            raise ValueError("num_arms must be >= 2")
        if horizon < 2:
            raise ValueError("horizon must be >= 2 (the barrier rate vanishes at 1)")
        self.num_arms = num_arms
        self.horizon = horizon
        self.rho_star = _check_rho_star(rho_star)
        self.grid = partially_concealed_grid(num_arms, horizon, rho_star)
        self.rates_per_arm = self.grid.count
        self.arm_prior = _check_arm_prior(prior, num_arms)
        if self.arm_prior.min() < 1.0 / horizon**2:
            warnings.warn(
                "smallest prior weight is below 1/horizon^2; the imposed"
                " exploration floor no longer covers it",
                RuntimeWarning,
                stacklevel=2,
            )
        dim = num_arms * self.rates_per_arm
        # barrier component anchored at the flat uniform; entropy component
        # anchored at the prior spread over rate columns
        self._psi_prior = np.full(dim, 1.0 / dim)
        self._phi_prior = np.outer(
            self.arm_prior, _rate_weights(self.rates_per_arm)
        ).ravel()
        # the per-rate entropy component never changes across rounds
        self._phi = PerRateNegEntropy(self.grid.rates, num_arms)
        self._totals = np.zeros(dim)
        self._observed_sum = 0.0
        self._plays: dict[int, tuple[int, float]] = {}
        self._round = 0
        self._warm: SolveResult | None = None

    @property
    def round_index(self) -> int:
        return self._round

    @property
    def totals(self) -> np.ndarray:
        return self._totals.copy()

    @property
    def observed_loss_sum(self) -> float:
        """Sum of raw own losses delivered so far (drives the barrier rate)."""
        return self._observed_sum

    def barrier_rate(self) -> float:
        """The marginal-barrier learning rate the next round will use."""
        return math.sqrt(
            self.num_arms
            * math.log(self.horizon)
            / (4.0 * (1.0 + self.rho_star) + 4.0 * self._observed_sum)
        )

    def predict(self, rng: np.random.Generator) -> Prediction:
        t = self._round + 1
        if t > self.horizon:
            raise ValueError("the horizon is exhausted")
        reg = HybridRegularizer(
            LogBarrierOverMarginals(self.barrier_rate(), self.num_arms, self.rates_per_arm),
            self._phi,
            self._psi_prior,
            self._phi_prior,
        )
        z = self._totals + reg.loss_offset()
        res = solve(z, reg, warm=self._warm)
        self._warm = res
        marginals = res.distribution.reshape(self.num_arms, self.rates_per_arm).sum(axis=1)
        action = _sample(marginals, rng)
        self._plays[t] = (action, float(marginals[action - 1]))
        self._round = t
        return Prediction(
            round_index=t,
            distribution=res.distribution,
            marginals=marginals,
            action=action,
            regularizer=reg,
            shifted_loss=z,
            result=res,
            grid=self.grid,
        )

    def absorb(self, events) -> None:
        for event in events:
            self._absorb_one(event)

    def _absorb_one(self, event: FeedbackEvent) -> None:
        if event.missing_count is None:
            raise ValueError(
                "partially concealed feedback must carry the origin-round"
                " missing count; an event without one belongs to the"
                " concealed setting"
            )
        play = self._plays.get(event.origin_round)
        if play is None:
            raise ValueError(
                f"feedback for round {event.origin_round} was never played"
                " or was already folded in"
            )
        arm, marginal = play
        if event.arm != arm:
            raise ValueError(
                f"feedback for round {event.origin_round} names arm {event.arm},"
                f" but arm {arm} was played"
            )
        loss = _check_loss(event.loss)
        del self._plays[event.origin_round]
        estimate = loss / marginal
        increment = estimate * (1.0 + 4.0 * self.grid.rates * event.missing_count)
        start = (arm - 1) * self.rates_per_arm
        self._totals[start : start + self.rates_per_arm] += increment
        self._observed_sum += loss


class ConcealedLearner:
    """Delayed bandit with no delay information at all.

    Works on the plain arm simplex with a Tsallis-plus-entropy hybrid.
    The importance weight is smoothed by an exploration floor epsilon_t =
    1/sqrt(t), the square-root rate is 1/sqrt(4t), and the entropy rate
    shrinks with an importance-weighted count of the played arm's own
    still-pending plays, scanned from the ledger at prediction time.
    Corrections are zero; ``rho_star`` must upper-bound every realized
    missing count.  The prior is uniform.
    """

    def __init__(self, num_arms: int, horizon: int, rho_star: float):
        if num_arms < 2:
            raise ValueError("num_arms must be >= 2")
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.num_arms = num_arms
        self.horizon = horizon
        self.rho_star = _check_rho_star(rho_star)
        self._log_arms = math.log(num_arms)
        self._prior = np.full(num_arms, 1.0 / num_arms)
        self._zero = ZeroRegularizer(num_arms)
        self._totals = np.zeros(num_arms)
        self._pending: dict[int, tuple[int, float, float]] = {}
        self._pending_weight_sum = 0.0
        self._round = 0
        self._warm: SolveResult | None = None

    @property
    def round_index(self) -> int:
        return self._round

    @property
    def totals(self) -> np.ndarray:
        return self._totals.copy()

    @property
    def pending_weight_sum(self) -> float:
        """Accumulated importance-weighted pending-play counts through the
        last predicted round (drives the entropy rate)."""
        return self._pending_weight_sum

    def exploration_floor(self, round_index: int) -> float:
        return 1.0 / math.sqrt(round_index)

    def square_root_rate(self, round_index: int) -> float:
        return 1.0 / math.sqrt(4.0 * round_index)

    def entropy_rate(self, round_index: int) -> float:
        """Rate for the entropy component at a round, given the pending-play
        weight accumulated over earlier rounds."""
        floor = self.exploration_floor(round_index)
        return math.sqrt(
            self._log_arms / (self.rho_star / floor + self._pending_weight_sum)
        )

    def predict(self, rng: np.random.Generator) -> Prediction:
        t = self._round + 1
        if t > self.horizon:
            raise ValueError("the horizon is exhausted")
        epsilon = self.exploration_floor(t)
        reg = HybridRegularizer(
            TsallisEntropyHybrid(self.square_root_rate(t), self.entropy_rate(t), self.num_arms),
            self._zero,
            self._prior,
        )
        z = self._totals + reg.loss_offset()
        res = solve(z, reg, warm=self._warm)
        self._warm = res
        q = res.distribution
        action = _sample(q, rng)
        # the played arm's own pending plays, importance-weighted by their
        # origin-round probabilities; folded in before this round is pushed,
        # so only rounds strictly before t contribute
        self._pending_weight_sum += sum(
            1.0 / stored_q
            for stored_arm, stored_q, _ in self._pending.values()
            if stored_arm == action
        )
        self._pending[t] = (action, float(q[action - 1]), epsilon)
        self._round = t
        return Prediction(
            round_index=t,
            distribution=q,
            marginals=q,
            action=action,
            regularizer=reg,
            shifted_loss=z,
            result=res,
            epsilon=epsilon,
        )

    def absorb(self, events) -> None:
        for event in events:
            self._absorb_one(event)

    def _absorb_one(self, event: FeedbackEvent) -> None:
        entry = self._pending.get(event.origin_round)
        if entry is None:
            raise ValueError(
                f"feedback for round {event.origin_round} was never played"
                " or was already folded in"
            )
        arm, marginal, epsilon = entry
        if event.arm != arm:
            raise ValueError(
                f"feedback for round {event.origin_round} names arm {event.arm},"
                f" but arm {arm} was played"
            )
        loss = _check_loss(event.loss)
        del self._pending[event.origin_round]
        self._totals[arm - 1] += loss / (marginal + epsilon)
