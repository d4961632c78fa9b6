"""FTRL learners for adversarial decision problems with arm-dependent
feedback delays, an adversarial simulator, and a bound-certification
harness.

Three learners share one follow-the-regularized-leader skeleton over
corrected importance-weighted loss estimates: a full-information experts
learner, a bandit learner that still observes delay lengths, and a bandit
learner that conceals them.  The simulator generates loss/delay tables,
routes feedback events through a delivery queue, and the harness runs
seeded episodes, accounts regret against the true loss table, and
certifies the printed regret-bound right-hand sides.
"""

from .core import (
    DelaySchedule,
    DeliveryQueue,
    FeedbackEvent,
    LossTable,
    MissingTracker,
    available_set,
    missing_count,
    missing_count_table,
)
from .environments import Scenario, generate, realized_rho_star, route
from .harness import (
    AggregateReport,
    BoundStatistics,
    EpisodeTrace,
    ExperimentConfig,
    best_arm,
    cumulative_regret,
    emit,
    load_config,
    monte_carlo,
    regret,
    run_episode,
    theorem_bound,
    tradeoff_arm,
)
from .learners import (
    ConcealedLearner,
    FullInformationLearner,
    PartiallyConcealedLearner,
    Prediction,
    RateGrid,
    full_information_grid,
    loss_estimate,
    partially_concealed_grid,
    rate_count,
)
from .regularizers import (
    HybridRegularizer,
    LogBarrierOverMarginals,
    PerRateNegEntropy,
    TsallisEntropyHybrid,
    WeightedNegEntropy,
    ZeroRegularizer,
)
from .solver import SolveResult, SolverError, kkt_residual, solve

__all__ = [
    "DelaySchedule",
    "DeliveryQueue",
    "FeedbackEvent",
    "LossTable",
    "MissingTracker",
    "available_set",
    "missing_count",
    "missing_count_table",
    "Scenario",
    "generate",
    "realized_rho_star",
    "route",
    "AggregateReport",
    "BoundStatistics",
    "EpisodeTrace",
    "ExperimentConfig",
    "best_arm",
    "cumulative_regret",
    "emit",
    "load_config",
    "monte_carlo",
    "regret",
    "run_episode",
    "theorem_bound",
    "tradeoff_arm",
    "ConcealedLearner",
    "FullInformationLearner",
    "PartiallyConcealedLearner",
    "Prediction",
    "RateGrid",
    "full_information_grid",
    "loss_estimate",
    "partially_concealed_grid",
    "rate_count",
    "HybridRegularizer",
    "LogBarrierOverMarginals",
    "PerRateNegEntropy",
    "TsallisEntropyHybrid",
    "WeightedNegEntropy",
    "ZeroRegularizer",
    "SolveResult",
    "SolverError",
    "kkt_residual",
    "solve",
]
