"""Independent reference computations used to verify the main modules.

Everything here is deliberately written against definitions rather than
against the production code paths: closed forms, dense linear algebra,
finite differences, dense scans and exhaustive loops.  The drift
machinery replays learner episodes and re-derives every quantity it
checks from the simulator's own records.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .regularizers import (
    HybridRegularizer,
    LogBarrierOverMarginals,
    PerRateNegEntropy,
    TsallisEntropyHybrid,
    WeightedNegEntropy,
    ZeroRegularizer,
)

__all__ = [
    "OracleReport",
    "hedge_closed_form",
    "finite_difference",
    "dense_scan_root",
    "kl_divergence",
    "random_solver_instance",
    "solver_battery",
    "hedge_equivalence_battery",
    "derivative_battery",
    "DriftInstance",
    "drift_check",
    "drift_instances",
    "drift_battery",
    "brute_force_regret",
    "importance_weighted_hedge",
    "iw_hedge_regrets",
    "estimator_battery",
]


@dataclass
class OracleReport:
    """Outcome of one verification battery."""

    name: str
    instances: int
    max_violation: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: {self.instances} instances, "
            f"max violation {self.max_violation:.3e} (tol {self.tolerance:.0e})"
        )


def hedge_closed_form(prior: np.ndarray, rate: float, losses: np.ndarray) -> np.ndarray:
    """p_i proportional to prior_i * exp(-rate * losses_i), in log space."""
    prior = np.asarray(prior, dtype=float)
    losses = np.asarray(losses, dtype=float)
    logits = np.log(prior) - rate * losses
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def finite_difference(fn, point: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    point = np.asarray(point, dtype=float)
    grad = np.empty_like(point)
    for i in range(point.size):
        bump = np.zeros_like(point)
        h = step * max(1.0, abs(point[i]))
        bump[i] = h
        grad[i] = (fn(point + bump) - fn(point - bump)) / (2.0 * h)
    return grad


def dense_scan_root(fn, lo: float, hi: float, target: float, points: int = 1_000_000) -> float:
    """Root of an increasing function by dense log-spaced scan plus linear
    interpolation between the two bracketing grid points."""
    grid = np.exp(np.linspace(np.log(lo), np.log(hi), points))
    vals = fn(grid) - target
    idx = int(np.searchsorted(vals, 0.0))
    if idx == 0:
        return float(grid[0])
    if idx >= points:
        return float(grid[-1])
    x0, x1 = grid[idx - 1], grid[idx]
    y0, y1 = vals[idx - 1], vals[idx]
    return float(x0 - y0 * (x1 - x0) / (y1 - y0))


def kl_divergence(u: np.ndarray, prior: np.ndarray) -> float:
    """KL(u, prior) with the 0 ln 0 = 0 convention."""
    u = np.asarray(u, dtype=float)
    prior = np.asarray(prior, dtype=float)
    mask = u > 0.0
    return float(np.sum(u[mask] * np.log(u[mask] / prior[mask])))


# ---------------------------------------------------------------------------
# random solve instances and the solver battery
# ---------------------------------------------------------------------------

SOLVER_FAMILIES = ("entropy", "barrier", "tsallis")


def _random_prior(rng, n: int) -> np.ndarray:
    w = rng.uniform(0.1, 1.0, size=n)
    return w / w.sum()


def random_solver_instance(rng: np.random.Generator, family: str):
    """A (shifted_loss, regularizer) pair with the shapes and magnitudes the
    learners actually produce: grid-structured rates, prior offsets, and
    cumulative loss estimates of varying scale."""
    K = int(rng.integers(2, 5))
    J = int(rng.integers(1, 4))
    scale = float(rng.choice([1.0, 10.0, 100.0]))
    if family == "entropy":
        grid = np.sort(rng.uniform(0.02, 0.5, size=J))[::-1]
        rates = np.tile(grid, K)
        weights = 2.0 ** (-2.0 * np.arange(1, J + 1))
        weights /= weights.sum()
        prior = (np.outer(_random_prior(rng, K), weights)).ravel()
        reg = HybridRegularizer(WeightedNegEntropy(rates), ZeroRegularizer(K * J), prior)
        base = rng.uniform(0.0, scale, size=K)
        losses = np.repeat(base, J) * (1.0 + 4.0 * rates)
        z = losses + reg.loss_offset()
    elif family == "barrier":
        eta = float(rng.uniform(0.05, 0.8))
        gammas = np.sort(rng.uniform(0.02, 0.3, size=J))[::-1].copy()
        psi_prior = np.full(K * J, 1.0 / (K * J))
        weights = 2.0 ** (-2.0 * np.arange(1, J + 1))
        weights /= weights.sum()
        phi_prior = (np.outer(_random_prior(rng, K), weights)).ravel()
        reg = HybridRegularizer(
            LogBarrierOverMarginals(eta, K, J), PerRateNegEntropy(gammas, K), psi_prior, phi_prior
        )
        base = rng.uniform(0.0, scale, size=K)
        losses = (base[:, None] * (1.0 + 4.0 * gammas[None, :])).ravel()
        z = losses + reg.loss_offset()
    elif family == "tsallis":
        eta = float(rng.uniform(0.02, 0.5))
        gamma = float(rng.uniform(0.02, 0.5))
        prior = np.full(K, 1.0 / K)
        reg = HybridRegularizer(TsallisEntropyHybrid(eta, gamma, K), ZeroRegularizer(K), prior)
        z = rng.uniform(0.0, scale, size=K) + reg.loss_offset()
    else:
        raise ValueError(f"unknown family {family!r}")
    return z, reg


def solver_battery(instances_per_family: int = 500, seed: int = 2024) -> list[OracleReport]:
    """Criterion battery for the simplex solves: stationarity residual,
    simplex feasibility, and agreement between two different warm starts."""
    from .solver import kkt_residual, solve

    rng = np.random.default_rng(seed)
    worst_residual = 0.0
    worst_sum = 0.0
    worst_warm = 0.0
    total = 0
    start = time.perf_counter()
    for family in SOLVER_FAMILIES:
        previous = None
        for _ in range(instances_per_family):
            z, reg = random_solver_instance(rng, family)
            cold = solve(z, reg)
            shifted = solve(z + rng.uniform(0.5, 2.0), reg)
            warm_a = solve(z, reg, warm=shifted)
            warm_b = solve(z, reg, warm=previous) if previous is not None else cold
            for res in (cold, warm_a, warm_b):
                worst_residual = max(worst_residual, kkt_residual(res, z, reg))
                worst_sum = max(worst_sum, abs(float(res.distribution.sum()) - 1.0))
            worst_warm = max(
                worst_warm,
                float(np.max(np.abs(warm_a.distribution - warm_b.distribution))),
                float(np.max(np.abs(cold.distribution - warm_a.distribution))),
            )
            previous = cold
            total += 1
    elapsed = time.perf_counter() - start
    extra = {"elapsed_seconds": elapsed}
    return [
        OracleReport("solver stationarity residual", total, worst_residual, 1e-8, extra),
        OracleReport("solver simplex feasibility", total, worst_sum, 1e-10, extra),
        OracleReport("solver warm-start agreement", total, worst_warm, 1e-9, extra),
    ]


def hedge_equivalence_battery(triples: int = 200, seed: int = 2025) -> OracleReport:
    """Single-rate entropy solves against the exponential-weights closed form."""
    from .solver import solve

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(triples):
        K = int(rng.integers(2, 8))
        eta = float(rng.uniform(0.05, 2.0))
        prior = _random_prior(rng, K)
        losses = rng.uniform(0.0, 10.0, size=K)
        reg = HybridRegularizer(
            WeightedNegEntropy(np.full(K, eta)), ZeroRegularizer(K), prior
        )
        res = solve(losses + reg.loss_offset(), reg)
        expect = hedge_closed_form(prior, eta, losses)
        worst = max(worst, float(np.max(np.abs(res.distribution - expect))))
    return OracleReport("hedge closed-form equivalence", triples, worst, 1e-8)


# ---------------------------------------------------------------------------
# drift inequality at reachable learner states
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DriftInstance:
    """One reachable FTRL state captured from a replayed episode.

    ``available`` is the cumulative corrected estimate the learner solved
    against, ``own_estimate`` the current round's full estimate vector and
    ``pending_mass`` the sum of estimates from older rounds still in
    flight; their sum is the gap between the fully-informed and the
    available cumulative losses.  ``available_result`` is the on-policy
    solve at this state.  ``identity_deviation`` records how far the
    replay's two independent computations of that gap disagreed
    (relative, should be at rounding level).
    """

    regularizer: HybridRegularizer
    available: np.ndarray
    own_estimate: np.ndarray
    pending_mass: np.ndarray
    available_result: object
    identity_deviation: float


def drift_check(instance: DriftInstance, tolerance: float = 1e-8) -> OracleReport:
    """Verify the one-step drift bound at one state.

    Solves the look-ahead step against the fully-informed cumulative loss
    under the same regularizer and checks
    <p_av - p_next, own> <= (own + pending)^T H(p_av)^{-1} own
    with H the regularizer Hessian at the available solution, plus the
    normalization-multiplier monotonicity c_av <= c_next.
    """
    from .solver import SolverError, solve

    reg = instance.regularizer
    diff = instance.own_estimate + instance.pending_mass
    z_next = instance.available + diff + reg.loss_offset()
    try:
        nxt = solve(z_next, reg, warm=instance.available_result)
    except SolverError as exc:
        return OracleReport(
            "drift", 0, float("inf"), tolerance, {"skipped": 1, "error": str(exc)}
        )
    p_av = instance.available_result.distribution
    lhs = float((p_av - nxt.distribution) @ instance.own_estimate)
    rhs = float(diff @ reg.hessian_inverse_apply(p_av, instance.own_estimate))
    multiplier_gap = float(instance.available_result.multiplier - nxt.multiplier)
    return OracleReport(
        "drift",
        1,
        lhs - rhs,
        tolerance,
        {
            "lhs": lhs,
            "rhs": rhs,
            "multiplier_gap": multiplier_gap,
            "skipped": 0,
        },
    )


def _drift_episode(setting: str, scenario, rng: np.random.Generator) -> list[DriftInstance]:
    """Replay one episode, emitting a DriftInstance per round.

    The replay keeps its own ledger of per-event increment vectors,
    recomputed from the environment tables with the same arithmetic the
    learners use, and cross-checks the learner's cumulative totals
    against the ledger's delivered sum every round.
    """
    from .core import DeliveryQueue, missing_count_table
    from .environments import generate, realized_rho_star, route
    from .learners import (
        ConcealedLearner,
        FullInformationLearner,
        PartiallyConcealedLearner,
        full_information_grid,
        partially_concealed_grid,
    )

    tables = generate(scenario)
    losses, schedule = tables
    missing = missing_count_table(schedule)
    T, K = scenario.horizon, scenario.num_arms
    if setting == "full_info":
        learner = FullInformationLearner(K, T)
    elif setting == "partially_concealed":
        rho_star = float(max(1, realized_rho_star(schedule)))
        learner = PartiallyConcealedLearner(K, T, rho_star)
        pc_rates = partially_concealed_grid(K, T, rho_star).rates
    else:
        rho_star = float(max(1, realized_rho_star(schedule)))
        learner = ConcealedLearner(K, T, rho_star)
    dim = K * learner.rates_per_arm if setting != "concealed" else K
    queue = DeliveryQueue(T)
    ledger: dict[tuple[int, int], tuple[int, np.ndarray]] = {}
    delivered_total = np.zeros(dim)
    full_total = np.zeros(dim)
    plays: dict[int, tuple[int, float, float]] = {}
    instances = []
    for t in range(1, T + 1):
        if setting == "full_info":
            pred = learner.predict()
            action = None
        else:
            pred = learner.predict(rng)
            action = pred.action
            eps = pred.epsilon if pred.epsilon is not None else 0.0
            plays[t] = (action, float(pred.marginals[action - 1]), float(eps))
        available = learner.totals
        bookkeeping = float(np.max(np.abs(available - delivered_total), initial=0.0))
        pending = np.zeros(dim)
        for (s, _), (delivery, vec) in ledger.items():
            if s < t and delivery >= t:
                pending += vec
        own = np.zeros(dim)
        for delivery, event in route(setting, tables, t, action, missing):
            vec = np.zeros(dim)
            if setting == "full_info":
                rho_max_origin = int(missing[:t].max(initial=0))
                rates = full_information_grid(t, rho_max_origin, K, T).rates
                block = (event.arm - 1) * rates.size
                vec[block : block + rates.size] = event.loss * (
                    1.0 + 4.0 * rates * (1.0 + event.missing_count)
                )
            elif setting == "partially_concealed":
                _, marginal, _ = plays[t]
                estimate = event.loss / marginal
                block = (event.arm - 1) * pc_rates.size
                vec[block : block + pc_rates.size] = estimate * (
                    1.0 + 4.0 * pc_rates * event.missing_count
                )
            else:
                _, marginal, eps = plays[t]
                vec[event.arm - 1] = event.loss / (marginal + eps)
            own += vec
            full_total = full_total + vec
            ledger[(t, event.arm)] = (delivery, vec)
            queue.push(delivery, event)
        two_ways = (own + pending) - (full_total - delivered_total)
        scale = max(1.0, float(np.max(np.abs(full_total), initial=0.0)))
        identity = max(bookkeeping, float(np.max(np.abs(two_ways), initial=0.0))) / scale
        instances.append(
            DriftInstance(
                regularizer=pred.regularizer,
                available=available,
                own_estimate=own,
                pending_mass=pending,
                available_result=pred.result,
                identity_deviation=identity,
            )
        )
        batch = queue.deliveries_at(t)
        for event in batch:
            delivered_total = delivered_total + ledger[(event.origin_round, event.arm)][1]
        learner.absorb(batch)
    return instances


def _random_drift_scenario(rng: np.random.Generator):
    from .environments import Scenario

    K = int(rng.integers(2, 5))
    T = int(rng.integers(12, 51))
    base = float(rng.uniform(0.0, 0.4))
    gap = float(rng.uniform(0.1, min(0.5, 1.0 - base)))
    kind = int(rng.integers(0, 4))
    seed = int(rng.integers(0, 2**31))
    if kind == 0:
        return Scenario("bernoulli_gap", "zero", T, K, seed=seed, base_loss=base, loss_gap=gap)
    if kind == 1:
        return Scenario(
            "bernoulli_gap", "constant", T, K, seed=seed,
            base_loss=base, loss_gap=gap, delay_value=int(rng.integers(1, 7)),
        )
    if kind == 2:
        return Scenario(
            "bernoulli_gap", "random_bounded", T, K, seed=seed,
            base_loss=base, loss_gap=gap, max_delay=int(rng.integers(1, 9)),
        )
    return Scenario(
        "bernoulli_gap", "arm_constant", T, K, seed=seed,
        base_loss=base, loss_gap=gap,
        arm_delays=tuple(int(d) for d in rng.integers(0, 7, size=K)),
    )


def drift_instances(setting: str, rng: np.random.Generator, target: int) -> list[DriftInstance]:
    """At least ``target`` reachable states for one learner, across random
    scenarios mixing delay regimes."""
    instances: list[DriftInstance] = []
    while len(instances) < target:
        scenario = _random_drift_scenario(rng)
        instances.extend(_drift_episode(setting, scenario, rng))
    return instances[:target]


def drift_battery(
    instances_per_learner: int = 1000, seed: int = 2027, tolerance: float = 1e-8
) -> list[OracleReport]:
    """Drift inequality and multiplier monotonicity at reachable states."""
    from .environments import SETTINGS

    rng = np.random.default_rng(seed)
    reports = []
    for setting in SETTINGS:
        worst_gap = -float("inf")
        worst_multiplier = -float("inf")
        worst_identity = 0.0
        checked = 0
        skipped = 0
        for instance in drift_instances(setting, rng, instances_per_learner):
            result = drift_check(instance, tolerance)
            if result.details.get("skipped"):
                skipped += 1
                continue
            checked += 1
            worst_gap = max(worst_gap, result.max_violation)
            worst_multiplier = max(worst_multiplier, result.details["multiplier_gap"])
            worst_identity = max(worst_identity, instance.identity_deviation)
        extra = {"skipped": skipped, "identity_deviation": worst_identity}
        reports.append(
            OracleReport(
                f"drift inequality ({setting})", checked, worst_gap, tolerance, extra
            )
        )
        reports.append(
            OracleReport(
                f"multiplier monotonicity ({setting})", checked, worst_multiplier, 1e-9
            )
        )
    return reports


# ---------------------------------------------------------------------------
# regret by exhaustive comparison, and the no-delay baseline
# ---------------------------------------------------------------------------


def brute_force_regret(loss_table, trace) -> tuple[int, float]:
    """Best arm by exhaustive column scan and the trace's regret against it.

    Accumulates with correctly-rounded summation (math.fsum), so the
    returned regret is the float closest to the exact value; vectorized
    accounting elsewhere must agree with it to rounding accuracy.
    """
    import math

    values = loss_table.values if hasattr(loss_table, "values") else np.asarray(loss_table)
    horizon, num_arms = values.shape
    best = 1
    best_total = float("inf")
    for arm in range(1, num_arms + 1):
        total = math.fsum(float(values[t, arm - 1]) for t in range(horizon))
        if total < best_total:
            best_total = total
            best = arm
    terms = [float(trace.incurred[t]) for t in range(horizon)]
    terms.extend(-float(values[t, best - 1]) for t in range(horizon))
    return best, math.fsum(terms)


def importance_weighted_hedge(
    loss_values: np.ndarray,
    seed: int,
    prior: np.ndarray | None = None,
    rate: float | None = None,
) -> np.ndarray:
    """Plain importance-weighted exponential weights, no delay machinery.

    Fixed learning rate sqrt(ln K / (K T)) unless given; returns the
    per-round incurred losses.
    """
    loss_values = np.asarray(loss_values, dtype=float)
    horizon, num_arms = loss_values.shape
    if prior is None:
        prior = np.full(num_arms, 1.0 / num_arms)
    if rate is None:
        rate = float(np.sqrt(np.log(num_arms) / (num_arms * horizon)))
    totals = np.zeros(num_arms)
    incurred = np.empty(horizon)
    rng = np.random.default_rng(seed)
    for t in range(horizon):
        q = hedge_closed_form(prior, rate, totals)
        cdf = np.cumsum(q)
        draw = rng.random() * cdf[-1]
        arm = min(int(np.searchsorted(cdf, draw, side="right")), num_arms - 1)
        loss = float(loss_values[t, arm])
        incurred[t] = loss
        totals[arm] += loss / q[arm]
    return incurred


def iw_hedge_regrets(loss_values: np.ndarray, seeds) -> np.ndarray:
    """Baseline regret against the best arm, one entry per seed."""
    loss_values = np.asarray(loss_values, dtype=float)
    best_total = float(loss_values.sum(axis=0).min())
    return np.array(
        [
            float(importance_weighted_hedge(loss_values, seed).sum()) - best_total
            for seed in seeds
        ]
    )


# ---------------------------------------------------------------------------
# estimator battery
# ---------------------------------------------------------------------------


def estimator_battery(draws: int = 100_000, seed: int = 2028) -> list[OracleReport]:
    """Monte-Carlo unbiasedness of the importance-weighted estimate at
    epsilon = 0, and the 1/epsilon cap under the concealed schedule."""
    from .learners import loss_estimate

    rng = np.random.default_rng(seed)
    worst_sigmas = 0.0
    pairs = [(0.3, 0.8), (0.05, 1.0), (0.9, 0.25)]
    for q, loss in pairs:
        hit_value = loss_estimate(1, 1, q, 0.0, loss)
        miss_value = loss_estimate(2, 1, q, 0.0, loss)
        samples = np.where(rng.random(draws) < q, hit_value, miss_value)
        se = float(samples.std(ddof=1) / np.sqrt(draws))
        worst_sigmas = max(worst_sigmas, abs(float(samples.mean()) - loss) / se)
    worst_excess = -float("inf")
    count = 0
    for t in range(1, 201):
        eps = 1.0 / np.sqrt(t)
        for q in rng.uniform(1e-6, 1.0, size=5):
            estimate = loss_estimate(1, 1, float(q), float(eps), 1.0)
            worst_excess = max(worst_excess, estimate - 1.0 / eps)
            count += 1
    return [
        OracleReport(
            "estimator unbiasedness (eps=0)", len(pairs) * draws, worst_sigmas, 3.0
        ),
        OracleReport("estimator cap (eps = 1/sqrt(t))", count, worst_excess, 1e-12),
    ]


def derivative_battery(points: int = 200, seed: int = 2026) -> list[OracleReport]:
    """Analytic gradients against central differences, and the rank-one
    block inverse against a dense solve."""
    rng = np.random.default_rng(seed)
    worst_grad = 0.0
    for _ in range(points):
        family = SOLVER_FAMILIES[int(rng.integers(0, 3))]
        _, reg = random_solver_instance(rng, family)
        p = rng.uniform(0.05, 1.0, size=reg.dimension)
        raw = lambda x: reg.psi.value(x) + reg.phi.value(x)
        fd = finite_difference(raw, p)
        g = reg.gradient(p)
        denom = np.maximum(np.abs(fd), 1.0)
        worst_grad = max(worst_grad, float(np.max(np.abs(g - fd) / denom)))

    worst_inv = 0.0
    for _ in range(points):
        K = int(rng.integers(1, 5))
        J = int(rng.integers(1, 6))
        eta = float(rng.uniform(0.05, 0.8))
        gammas = np.sort(rng.uniform(0.02, 0.5, size=J))[::-1].copy()
        psi_prior = np.full(K * J, 1.0 / (K * J))
        phi_prior = _random_prior(rng, K * J)
        reg = HybridRegularizer(
            LogBarrierOverMarginals(eta, K, J), PerRateNegEntropy(gammas, K), psi_prior, phi_prior
        )
        p = rng.uniform(0.01, 1.0, size=K * J)
        v = rng.normal(size=K * J)
        got = reg.hessian_inverse_apply(p, v)
        P = p.reshape(K, J)
        q = P.sum(axis=1)
        expect = np.empty_like(v)
        for i in range(K):
            block = np.ones((J, J)) / (eta * q[i] ** 2) + np.diag(1.0 / (gammas * P[i]))
            expect[i * J : (i + 1) * J] = np.linalg.solve(block, v[i * J : (i + 1) * J])
        scale = np.maximum(np.abs(expect), 1.0)
        worst_inv = max(worst_inv, float(np.max(np.abs(got - expect) / scale)))
    return [
        OracleReport("analytic gradient vs central differences", points, worst_grad, 1e-5),
        OracleReport("block Hessian inverse vs dense solve", points, worst_inv, 1e-8),
    ]
