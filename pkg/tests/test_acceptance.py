"""Acceptance gate: one test per stated criterion, one verdict line each.

Every criterion is checked at its stated tolerance and scale; run

    pytest tests/test_acceptance.py -v -s

to see the verdict lines as they complete.  The bound certificates
(criteria 6-9) dominate the runtime; each stays inside its stated budget
on a single core.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np

from delaybandits.environments import Scenario, generate
from delaybandits.harness import ExperimentConfig, certificate_configs, monte_carlo
from delaybandits.oracle import (
    derivative_battery,
    drift_battery,
    estimator_battery,
    hedge_equivalence_battery,
    iw_hedge_regrets,
    solver_battery,
)


def _verdict(number: int, label: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({label}): {detail}", flush=True)
    assert ok, f"criterion {number} ({label}): {detail}"


def test_criterion_1_solver_correctness():
    start = time.perf_counter()
    kkt, feasibility, warm = solver_battery(500)
    elapsed = time.perf_counter() - start
    ok = kkt.passed and feasibility.passed and warm.passed and elapsed < 30.0
    _verdict(
        1,
        "solver correctness",
        ok,
        f"500/family, KKT {kkt.max_violation:.2e} (tol 1e-8), "
        f"|sum-1| {feasibility.max_violation:.2e} (tol 1e-10), "
        f"warm-start {warm.max_violation:.2e} (tol 1e-9), {elapsed:.1f}s (< 30s)",
    )


def test_criterion_2_hedge_equivalence():
    report = hedge_equivalence_battery(200)
    _verdict(
        2,
        "exponential-weights equivalence",
        report.passed,
        f"200 triples, max deviation {report.max_violation:.2e} (tol 1e-8)",
    )


def test_criterion_3_derivative_checks():
    gradients, inverse = derivative_battery(200)
    ok = gradients.passed and inverse.passed
    _verdict(
        3,
        "derivative checks",
        ok,
        f"gradients {gradients.max_violation:.2e} (tol 1e-5 relative), "
        f"block inverse {inverse.max_violation:.2e} (tol 1e-8), 200 each",
    )


def test_criterion_4_drift_certificate():
    reports = drift_battery(1000)
    drift = [r for r in reports if r.name.startswith("drift")]
    mono = [r for r in reports if r.name.startswith("multiplier")]
    ok = (
        all(r.passed for r in reports)
        and all(r.instances >= 1000 for r in drift)
        and all(r.instances >= 1000 for r in mono)
    )
    worst_drift = max(r.max_violation for r in drift)
    worst_mono = max(r.max_violation for r in mono)
    _verdict(
        4,
        "drift certificate",
        ok,
        f"{min(r.instances for r in drift)} reachable instances/learner, "
        f"worst drift violation {worst_drift:.2e} (tol 1e-8), "
        f"worst multiplier gap {worst_mono:.2e} (<= 0 required)",
    )


def test_criterion_5_estimator_unbiasedness_and_cap():
    unbiased, cap = estimator_battery(100_000)
    ok = unbiased.passed and cap.passed
    _verdict(
        5,
        "estimator unbiasedness and cap",
        ok,
        f"worst mean deviation {unbiased.max_violation:.2f} standard errors (tol 3), "
        f"worst cap excess {cap.max_violation:.2e} (<= 0 required)",
    )


def test_criterion_6_full_information_certificates():
    configs = certificate_configs()
    ok = True
    parts = []
    for name in (
        "full_info_zero_delay",
        "full_info_constant_delay",
        "full_info_inverse_loss_delay",
    ):
        report, _ = monte_carlo(configs[name])
        good = (
            report.passed
            and not report.failures
            and bool(np.all(report.regrets <= report.bound))
        )
        ok = ok and good
        short = name.removeprefix("full_info_").replace("_", " ")
        parts.append(f"{short} max {float(report.regrets.max()):.1f} <= {report.bound:.0f}")
    _verdict(6, "full-information bound certificate", ok, "; ".join(parts))


def test_criterion_7_partially_concealed_certificate():
    config = certificate_configs()["partially_concealed_constant_delay"]
    start = time.perf_counter()
    report, _ = monte_carlo(config)
    elapsed = time.perf_counter() - start
    losses, _ = generate(config.scenario)
    loss_range = float((losses.values.max(axis=0) - losses.values.min(axis=0)).max())
    horizon = config.scenario.horizon
    per_round = report.regrets / horizon
    sublinear = bool(np.all(per_round <= 0.2 * loss_range))
    ok = (
        report.passed
        and not report.assumption_violated
        and report.regrets.size == 50
        and report.mean_regret <= report.bound
        and sublinear
        and elapsed < 600.0
    )
    _verdict(
        7,
        "partially concealed bound certificate",
        ok,
        f"50 seeds, mean {report.mean_regret:.1f} <= {report.bound:.0f}, "
        f"per-seed regret/T max {float(per_round.max()):.4f} <= {0.2 * loss_range:.2f}, "
        f"{elapsed:.0f}s (< 600s)",
    )


def test_criterion_8_concealed_certificate():
    config = certificate_configs()["concealed_constant_delay"]
    report, _ = monte_carlo(config)
    K = config.scenario.num_arms
    T = config.scenario.horizon
    explicit = (
        9.0 * math.sqrt(K * T)
        + 3.0 * math.sqrt(math.log(K) * report.delay_mass_mean)
        + report.rho_star / 2.0
    )
    ok = (
        report.passed
        and not report.assumption_violated
        and report.regrets.size == 50
        and report.mean_regret <= explicit
        and abs(report.bound - explicit) <= 1e-9 * explicit
    )
    _verdict(
        8,
        "concealed bound certificate",
        ok,
        f"50 seeds, mean {report.mean_regret:.1f} <= {explicit:.1f} "
        f"(delay mass from traces: {report.delay_mass_mean:.1f})",
    )


def test_criterion_9_zero_delay_reduction():
    scenario = Scenario(
        loss_kind="bernoulli_gap",
        delay_kind="zero",
        horizon=20000,
        num_arms=5,
        seed=104,
        base_loss=0.2,
        loss_gap=0.3,
    )
    seeds = tuple(range(1, 21))
    config = ExperimentConfig(
        setting="partially_concealed", scenario=scenario, seeds=seeds
    )
    report, _ = monte_carlo(config)
    losses, _ = generate(scenario)
    baseline = iw_hedge_regrets(losses.values, seeds)
    ratio = report.mean_regret / float(baseline.mean())
    ok = not report.failures and ratio <= 3.0
    _verdict(
        9,
        "zero-delay reduction",
        ok,
        f"20 seeds, mean {report.mean_regret:.1f} vs baseline {float(baseline.mean()):.1f}, "
        f"ratio {ratio:.2f} (<= 3)",
    )


def test_criterion_10_byte_identical_output(tmp_path):
    config = {
        "setting": "partially_concealed",
        "scenario": {
            "loss_kind": "bernoulli_gap",
            "delay_kind": "constant",
            "horizon": 300,
            "num_arms": 3,
            "seed": 7,
            "delay_value": 3,
        },
        "seeds": [1, 2],
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    outputs = []
    for run_dir in ("first", "second"):
        out = tmp_path / run_dir
        subprocess.run(
            [
                sys.executable,
                "-c",
                "from delaybandits.cli import main; raise SystemExit(main())",
                "run",
                "--config",
                str(config_path),
                "--out",
                str(out),
            ],
            check=False,
            capture_output=True,
        )
        outputs.append(out)
    csvs = sorted(p.name for p in outputs[0].glob("episode_*.csv"))
    identical = bool(csvs) and all(
        (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
        for name in csvs
    )
    _verdict(
        10,
        "byte-identical determinism",
        identical,
        f"{len(csvs)} episode CSVs identical across two separate runs",
    )
