"""Experiment runner: episodes, regret accounting, bound certificates, I/O.

An experiment is a JSON-described configuration: a feedback setting, a
scenario (loss and delay adversaries), learner parameters, and a list of
seeds.  The environment tables are drawn once from the scenario's own seed,
so every per-run seed sees the same adversary and drives only the learner's
sampling stream; averaging over seeds estimates the expectation the regret
bounds are stated for.  Full information runs are deterministic and yield
identical traces for every seed.

``run_episode`` executes the predict / incur / route / deliver / absorb
cycle and returns a flat trace.  ``monte_carlo`` folds traces into an
aggregate report carrying the setting's theorem-bound certificate, and
``emit`` writes one CSV per seed (header ``round,action,loss,cum_regret``;
the action column is 0 under full information where no arm is drawn),
a JSON summary, and matplotlib figures next to them.

Regret always uses the true loss table, never learner internals.  The
per-round cumulative regret column is measured against the fixed final
best arm.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, fields

import numpy as np

from .core import DelaySchedule, DeliveryQueue, LossTable, missing_count_table
from .environments import SETTINGS, Scenario, generate, realized_rho_star, route
from .learners import (
    ConcealedLearner,
    FullInformationLearner,
    PartiallyConcealedLearner,
)

__all__ = [
    "EpisodeTrace",
    "ExperimentConfig",
    "AggregateReport",
    "BoundStatistics",
    "load_config",
    "run_episode",
    "regret",
    "cumulative_regret",
    "best_arm",
    "tradeoff_arm",
    "theorem_bound",
    "monte_carlo",
    "emit",
    "certificate_configs",
]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {"setting", "scenario", "seeds", "prior", "rho_star", "output"}
_SCENARIO_KEYS = {f.name for f in fields(Scenario)}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A validated experiment description.

    ``rho_star`` is the missing-count upper bound handed to the bandit
    learners: a number (>= 1), or the string "auto" to use the realized
    maximum of the generated schedule, floored at 1.  ``prior`` is the
    per-arm prior (uniform when None).  Unused by full information runs.
    """

    setting: str
    scenario: Scenario
    seeds: tuple[int, ...] = (1,)
    prior: np.ndarray | None = None
    rho_star: float | str = "auto"
    output: str | None = None

    def __post_init__(self) -> None:
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; expected one of {SETTINGS}")
        if not self.seeds:
            raise ValueError("seeds must be a nonempty sequence of integers")
        seeds = tuple(int(s) for s in self.seeds)
        object.__setattr__(self, "seeds", seeds)
        if self.prior is not None:
            prior = np.asarray(self.prior, dtype=float)
            if prior.shape != (self.scenario.num_arms,):
                raise ValueError("prior length must equal the number of arms")
            if not np.all(np.isfinite(prior)) or prior.min() <= 0.0:
                raise ValueError("prior weights must be positive and finite")
            if abs(prior.sum() - 1.0) > 1e-9:
                raise ValueError("prior must sum to 1")
            object.__setattr__(self, "prior", prior)
        if isinstance(self.rho_star, str):
            if self.rho_star != "auto":
                raise ValueError('rho_star must be a number >= 1 or "auto"')
        else:
            value = float(self.rho_star)
            if not np.isfinite(value) or value < 1.0:
                raise ValueError('rho_star must be a number >= 1 or "auto"')
            object.__setattr__(self, "rho_star", value)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("setting", "scenario"):
            if key not in data:
                raise ValueError(f"config is missing the required key {key!r}")
        raw_scenario = data["scenario"]
        if not isinstance(raw_scenario, dict):
            raise ValueError("scenario must be a JSON object")
        unknown = set(raw_scenario) - _SCENARIO_KEYS
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        scenario_kwargs = dict(raw_scenario)
        if "arm_delays" in scenario_kwargs and scenario_kwargs["arm_delays"] is not None:
            scenario_kwargs["arm_delays"] = tuple(scenario_kwargs["arm_delays"])
        scenario = Scenario(**scenario_kwargs)
        return cls(
            setting=data["setting"],
            scenario=scenario,
            seeds=tuple(data.get("seeds", (1,))),
            prior=data.get("prior"),
            rho_star=data.get("rho_star", "auto"),
            output=data.get("output"),
        )

    def as_dict(self) -> dict:
        scenario = {
            "loss_kind": self.scenario.loss_kind,
            "delay_kind": self.scenario.delay_kind,
            "horizon": self.scenario.horizon,
            "num_arms": self.scenario.num_arms,
            "seed": self.scenario.seed,
            "loss_value": self.scenario.loss_value,
            "base_loss": self.scenario.base_loss,
            "loss_gap": self.scenario.loss_gap,
            "delay_value": self.scenario.delay_value,
            "arm_delays": list(self.scenario.arm_delays)
            if self.scenario.arm_delays is not None
            else None,
            "max_delay": self.scenario.max_delay,
        }
        return {
            "setting": self.setting,
            "scenario": scenario,
            "seeds": list(self.seeds),
            "prior": None if self.prior is None else [float(x) for x in self.prior],
            "rho_star": self.rho_star,
            "output": self.output,
        }

    def resolved_rho_star(self, schedule: DelaySchedule) -> float | None:
        """The bound handed to the learner; None under full information."""
        if self.setting == "full_info":
            return None
        if self.rho_star == "auto":
            return float(max(1, realized_rho_star(schedule)))
        return float(self.rho_star)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# episodes
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class EpisodeTrace:
    """Flat per-round record of one episode plus simulator-side totals.

    ``actions`` holds the sampled arm per round and 0 under full
    information.  ``loss_values`` is a shared reference to the true loss
    table; ``arm_losses`` are its column sums L_T(i) and
    ``weighted_losses`` the missing-count-weighted sums
    L^rho_T(i) = sum_t loss_t(i) * rho_t(i).  ``delay_mass`` is
    sum_t sum_i q_t(i) * rho_t(i).
    """

    setting: str
    seed: int
    horizon: int
    num_arms: int
    marginals: np.ndarray
    actions: np.ndarray
    incurred: np.ndarray
    loss_values: np.ndarray
    arm_losses: np.ndarray
    weighted_losses: np.ndarray
    delay_mass: float
    rho_max: int
    delivered_counts: np.ndarray
    discarded: int


def _build_learner(config: ExperimentConfig, rho_star: float | None):
    scenario = config.scenario
    if config.setting == "full_info":
        return FullInformationLearner(
            scenario.num_arms, scenario.horizon, prior=config.prior
        )
    if config.setting == "partially_concealed":
        return PartiallyConcealedLearner(
            scenario.num_arms, scenario.horizon, rho_star, prior=config.prior
        )
    return ConcealedLearner(scenario.num_arms, scenario.horizon, rho_star)


def run_episode(
    config: ExperimentConfig,
    seed: int,
    tables: tuple[LossTable, DelaySchedule] | None = None,
    missing: np.ndarray | None = None,
    rho_star: float | None = None,
) -> EpisodeTrace:
    """One full episode; deterministic given (config, seed).

    ``tables``, ``missing`` and ``rho_star`` may be precomputed by a
    multi-seed caller; they are derived from the config when omitted.
    """
    if tables is None:
        tables = generate(config.scenario)
    losses, schedule = tables
    if missing is None:
        missing = missing_count_table(schedule)
    if rho_star is None:
        rho_star = config.resolved_rho_star(schedule)
    T = losses.horizon
    K = losses.num_arms
    setting = config.setting
    full_info = setting == "full_info"
    learner = _build_learner(config, rho_star)
    rng = np.random.default_rng(seed)
    queue = DeliveryQueue(T)
    marginals = np.empty((T, K))
    actions = np.zeros(T, dtype=np.int64)
    incurred = np.empty(T)
    delivered_counts = np.zeros(T, dtype=np.int64)
    for t in range(1, T + 1):
        if full_info:
            pred = learner.predict()
            action = None
            incurred[t - 1] = float(pred.marginals @ losses.row(t))
        else:
            pred = learner.predict(rng)
            action = pred.action
            actions[t - 1] = action
            incurred[t - 1] = losses.loss(t, action)
        marginals[t - 1] = pred.marginals
        for delivery, event in route(setting, tables, t, action, missing):
            queue.push(delivery, event)
        batch = queue.deliveries_at(t)
        delivered_counts[t - 1] = len(batch)
        learner.absorb(batch)
    return EpisodeTrace(
        setting=setting,
        seed=seed,
        horizon=T,
        num_arms=K,
        marginals=marginals,
        actions=actions,
        incurred=incurred,
        loss_values=losses.values,
        arm_losses=losses.values.sum(axis=0),
        weighted_losses=(losses.values * missing).sum(axis=0),
        delay_mass=float((marginals * missing).sum()),
        rho_max=int(missing.max()),
        delivered_counts=delivered_counts,
        discarded=queue.discarded_total,
    )


# ---------------------------------------------------------------------------
# regret accounting
# ---------------------------------------------------------------------------


def _comparator_vector(comparator, num_arms: int) -> np.ndarray:
    if np.isscalar(comparator) or isinstance(comparator, (int, np.integer)):
        arm = int(comparator)
        if not 1 <= arm <= num_arms:
            raise ValueError(f"comparator arm {arm} out of range")
        u = np.zeros(num_arms)
        u[arm - 1] = 1.0
        return u
    u = np.asarray(comparator, dtype=float)
    if u.shape != (num_arms,) or np.any(u < 0.0) or abs(u.sum() - 1.0) > 1e-9:
        raise ValueError("comparator must be an arm index or a distribution over arms")
    return u


def regret(trace: EpisodeTrace, comparator) -> float:
    """Total realized regret of a trace against an arm or a distribution."""
    u = _comparator_vector(comparator, trace.num_arms)
    return float(trace.incurred.sum() - u @ trace.arm_losses)


def cumulative_regret(trace: EpisodeTrace, comparator) -> np.ndarray:
    """Per-round running regret against a fixed comparator."""
    u = _comparator_vector(comparator, trace.num_arms)
    return np.cumsum(trace.incurred - trace.loss_values @ u)


def best_arm(arm_losses: np.ndarray) -> int:
    """The arm with the smallest cumulative loss (1-indexed; ties to the first)."""
    return int(np.argmin(arm_losses)) + 1


def _kl_vertex(arm: int, prior: np.ndarray) -> float:
    return float(-math.log(prior[arm - 1]))


def tradeoff_arm(
    arm_losses: np.ndarray, weighted_losses: np.ndarray, prior: np.ndarray
) -> int:
    """Diagnostic comparator: the vertex minimizing
    L_T(i) + sqrt(KL(e_i, prior) * (L_T(i) + L^rho_T(i)))."""
    scores = [
        arm_losses[i]
        + math.sqrt(_kl_vertex(i + 1, prior) * (arm_losses[i] + weighted_losses[i]))
        for i in range(arm_losses.size)
    ]
    return int(np.argmin(scores)) + 1


# ---------------------------------------------------------------------------
# theorem-bound certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundStatistics:
    """Everything a regret-bound right-hand side reads."""

    num_arms: int
    horizon: int
    comparator: np.ndarray
    prior: np.ndarray
    arm_losses: np.ndarray
    weighted_losses: np.ndarray
    rho_max: int
    rho_star: float | None
    delay_mass: float


def _kl(u: np.ndarray, prior: np.ndarray) -> float:
    mask = u > 0.0
    return float(np.sum(u[mask] * np.log(u[mask] / prior[mask])))


def theorem_bound(setting: str, stats: BoundStatistics) -> float:
    """The printed regret-bound right-hand side for one setting.

    full_info:            4(1+r) + 12 sqrt(1+r)
                          + 8 sqrt((KL + 2(ln T + 1)) <u, L + L^rho>)
                          + 8 (KL + 2(ln T + 1))(1+r)
                          + 16 sqrt((1+r)(ln K + 2(1 + ln T)))
                          with r the realized max missing count.
    partially_concealed:  12 sqrt(K ln T <u, L>)
                          + 16 sqrt((KL + ln T + 1) <u, L^rho>)
                          + 48 (5 + ln T + KL) rho* + 42 K ln T.
    concealed:            9 sqrt(KT) + 3 sqrt(ln K * delay_mass) + rho*/2.
    """
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}")
    K, T = stats.num_arms, stats.horizon
    ln_t = math.log(T)
    ln_k = math.log(K)
    if setting == "concealed":
        return (
            9.0 * math.sqrt(K * T)
            + 3.0 * math.sqrt(ln_k * stats.delay_mass)
            + 0.5 * stats.rho_star
        )
    kl = _kl(stats.comparator, stats.prior)
    u = stats.comparator
    if setting == "full_info":
        r1 = 1.0 + stats.rho_max
        log_term = kl + 2.0 * (ln_t + 1.0)
        return (
            4.0 * r1
            + 12.0 * math.sqrt(r1)
            + 8.0 * math.sqrt(log_term * float(u @ (stats.arm_losses + stats.weighted_losses)))
            + 8.0 * log_term * r1
            + 16.0 * math.sqrt(r1 * (ln_k + 2.0 * (1.0 + ln_t)))
        )
    return (
        12.0 * math.sqrt(K * ln_t * float(u @ stats.arm_losses))
        + 16.0 * math.sqrt((kl + ln_t + 1.0) * float(u @ stats.weighted_losses))
        + 48.0 * (5.0 + ln_t + kl) * stats.rho_star
        + 42.0 * K * ln_t
    )


# ---------------------------------------------------------------------------
# multi-seed aggregation
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class AggregateReport:
    config: ExperimentConfig
    regrets: np.ndarray
    mean_regret: float
    stderr: float | None
    best_arm: int
    tradeoff_arm: int
    arm_losses: np.ndarray
    weighted_losses: np.ndarray
    rho_max: int
    rho_star: float | None
    delay_mass_mean: float
    bound: float
    bound_passed: bool
    assumption_violated: bool
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures and self.bound_passed


def monte_carlo(
    config: ExperimentConfig, keep_traces: bool = False
) -> tuple[AggregateReport, list[EpisodeTrace]]:
    """Run every configured seed and aggregate regret and certificates.

    Returns the report and the retained traces (empty unless
    ``keep_traces``).  Episode failures are recorded on the report rather
    than raised; any failure marks the report failed.
    """
    tables = generate(config.scenario)
    losses, schedule = tables
    missing = missing_count_table(schedule)
    rho_star = config.resolved_rho_star(schedule)
    rho_max = int(missing.max()) if missing.size else 0
    arm_losses = losses.values.sum(axis=0)
    weighted_losses = (losses.values * missing).sum(axis=0)
    prior = (
        config.prior
        if config.prior is not None
        else np.full(losses.num_arms, 1.0 / losses.num_arms)
    )
    target = best_arm(arm_losses)
    traces: list[EpisodeTrace] = []
    regrets: list[float] = []
    masses: list[float] = []
    failures: list[str] = []
    for seed in config.seeds:
        try:
            trace = run_episode(config, seed, tables=tables, missing=missing, rho_star=rho_star)
        except (ValueError, RuntimeError) as exc:
            failures.append(f"seed {seed}: {exc}")
            continue
        regrets.append(regret(trace, target))
        masses.append(trace.delay_mass)
        if keep_traces:
            traces.append(trace)
    regrets_arr = np.asarray(regrets)
    mean_regret = float(regrets_arr.mean()) if regrets else float("nan")
    stderr = (
        float(regrets_arr.std(ddof=1) / math.sqrt(regrets_arr.size))
        if regrets_arr.size > 1
        else None
    )
    delay_mass_mean = float(np.mean(masses)) if masses else float("nan")
    stats = BoundStatistics(
        num_arms=losses.num_arms,
        horizon=losses.horizon,
        comparator=_comparator_vector(target, losses.num_arms),
        prior=prior,
        arm_losses=arm_losses,
        weighted_losses=weighted_losses,
        rho_max=rho_max,
        rho_star=rho_star,
        delay_mass=delay_mass_mean,
    )
    bound = theorem_bound(config.setting, stats)
    assumption_violated = (
        config.setting != "full_info"
        and rho_star is not None
        and rho_star < rho_max
    )
    if failures or not regrets:
        bound_passed = False
    elif assumption_violated:
        # the learner ran outside the bound's hypotheses; certificate skipped
        bound_passed = True
    elif config.setting == "full_info":
        bound_passed = bool(np.all(regrets_arr <= bound))
    else:
        bound_passed = mean_regret <= bound
    return (
        AggregateReport(
            config=config,
            regrets=regrets_arr,
            mean_regret=mean_regret,
            stderr=stderr,
            best_arm=target,
            tradeoff_arm=tradeoff_arm(arm_losses, weighted_losses, prior),
            arm_losses=arm_losses,
            weighted_losses=weighted_losses,
            rho_max=rho_max,
            rho_star=rho_star,
            delay_mass_mean=delay_mass_mean,
            bound=bound,
            bound_passed=bound_passed,
            assumption_violated=assumption_violated,
            failures=tuple(failures),
        ),
        traces,
    )


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _write_csv(trace: EpisodeTrace, target_arm: int, path: str, full_dist: bool) -> None:
    running = cumulative_regret(trace, target_arm)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        header = "round,action,loss,cum_regret"
        if full_dist:
            header += "," + ",".join(f"q_{i}" for i in range(1, trace.num_arms + 1))
        handle.write(header + "\n")
        for t in range(trace.horizon):
            row = (
                f"{t + 1},{int(trace.actions[t])},"
                f"{float(trace.incurred[t])!r},{float(running[t])!r}"
            )
            if full_dist:
                row += "," + ",".join(repr(float(q)) for q in trace.marginals[t])
            handle.write(row + "\n")


def _render_figures(report: AggregateReport, traces: list[EpisodeTrace], out_dir: str) -> list[str]:
    from matplotlib.figure import Figure

    paths = []
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.subplots()
    rounds = np.arange(1, traces[0].horizon + 1)
    curves = np.array([cumulative_regret(tr, report.best_arm) for tr in traces])
    for trace, curve in zip(traces, curves):
        ax.plot(rounds, curve, linewidth=0.8, alpha=0.5, label=f"seed {trace.seed}")
    if len(traces) > 1:
        ax.plot(rounds, curves.mean(axis=0), linewidth=2.0, color="black", label="mean")
    ax.set_xlabel("round")
    ax.set_ylabel(f"cumulative regret vs arm {report.best_arm}")
    ax.set_title(f"{report.config.setting}: regret over time")
    if len(traces) <= 12:
        ax.legend(fontsize=7)
    fig.tight_layout()
    path = os.path.join(out_dir, "regret_curves.png")
    fig.savefig(path, dpi=120)
    paths.append(path)

    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.subplots()
    arms = np.arange(1, report.arm_losses.size + 1)
    final = np.mean([tr.marginals[-1] for tr in traces], axis=0)
    ax.bar(arms, final, color="tab:blue")
    ax.set_xticks(arms)
    ax.set_xlabel("arm")
    ax.set_ylabel("final-round probability (seed mean)")
    ax.set_title("where the learner ended up")
    fig.tight_layout()
    path = os.path.join(out_dir, "final_marginals.png")
    fig.savefig(path, dpi=120)
    paths.append(path)
    return paths


def emit(
    report: AggregateReport,
    traces: list[EpisodeTrace],
    out_dir: str,
    csv_full_dist: bool = False,
) -> list[str]:
    """Write per-seed CSVs, a JSON summary, and figures into a directory.

    Returns the written paths.  CSV content is a pure function of
    (config, seed): identical runs produce byte-identical files.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ValueError(f"cannot create output directory {out_dir}: {exc}") from exc
    paths = []
    for trace in traces:
        path = os.path.join(out_dir, f"episode_{trace.seed}.csv")
        try:
            _write_csv(trace, report.best_arm, path, csv_full_dist)
        except OSError as exc:
            raise ValueError(f"cannot write {path}: {exc}") from exc
        paths.append(path)
    summary = {
        "config": report.config.as_dict(),
        "seeds": list(report.config.seeds),
        "regrets": [float(r) for r in report.regrets],
        "mean_regret": report.mean_regret,
        "stderr": report.stderr,
        "best_arm": report.best_arm,
        "tradeoff_arm": report.tradeoff_arm,
        "arm_losses": [float(x) for x in report.arm_losses],
        "rho_max": report.rho_max,
        "rho_star": report.rho_star,
        "delay_mass_mean": report.delay_mass_mean,
        "bound": report.bound,
        "bound_passed": report.bound_passed,
        "assumption_violated": report.assumption_violated,
        "failures": list(report.failures),
        "passed": report.passed,
    }
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    paths.append(path)
    if traces:
        paths.extend(_render_figures(report, traces, out_dir))
    return paths


# ---------------------------------------------------------------------------
# certificate experiment definitions
# ---------------------------------------------------------------------------


def certificate_configs(quick: bool = False) -> dict[str, ExperimentConfig]:
    """The bound-certificate experiments, keyed by name.

    ``quick`` shrinks horizons and seed counts for smoke runs; the full
    versions match the acceptance checks.
    """
    t_full = 1_000 if quick else 10_000
    t_bandit = 2_000 if quick else 20_000
    seeds_bandit = tuple(range(1, 6 if quick else 51))
    configs = {
        "full_info_zero_delay": ExperimentConfig(
            setting="full_info",
            scenario=Scenario("bernoulli_gap", "zero", t_full, 10, seed=101),
            seeds=(1, 2),
        ),
        "full_info_constant_delay": ExperimentConfig(
            setting="full_info",
            scenario=Scenario(
                "bernoulli_gap", "constant", t_full, 10, seed=102, delay_value=5
            ),
            seeds=(1, 2),
        ),
        "full_info_inverse_loss_delay": ExperimentConfig(
            setting="full_info",
            scenario=Scenario(
                "bernoulli_gap", "inverse_loss", t_full, 10, seed=103, max_delay=10
            ),
            seeds=(1, 2),
        ),
        "partially_concealed_constant_delay": ExperimentConfig(
            setting="partially_concealed",
            scenario=Scenario(
                "bernoulli_gap", "constant", t_bandit, 5, seed=104, delay_value=10
            ),
            seeds=seeds_bandit,
        ),
        "concealed_constant_delay": ExperimentConfig(
            setting="concealed",
            scenario=Scenario(
                "bernoulli_gap", "constant", t_bandit, 5, seed=105, delay_value=10
            ),
            seeds=seeds_bandit,
        ),
    }
    return configs
