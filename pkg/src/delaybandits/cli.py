"""Command line entry points.

``run`` executes a JSON-configured experiment and writes per-seed CSVs,
a JSON summary, and figures.  ``check`` runs one of the verification
suites: ``solver`` (simplex solves, hedge equivalence, derivatives),
``drift`` (one-step drift inequality and estimator properties at
reachable learner states), or ``bounds`` (end-to-end regret-bound
certificates).  Exit status 0 means every certificate passed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delaybandits",
        description="Delayed-feedback FTRL experiments and verification suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser(
        "run", help="run a configured experiment and write CSV/summary/figures"
    )
    run_p.add_argument("--config", required=True, help="path to a JSON experiment config")
    run_p.add_argument(
        "--out", default=None, help="output directory (default: config's, else ./results)"
    )
    run_p.add_argument(
        "--seeds",
        type=int,
        default=None,
        metavar="N",
        help="override the config's seed list with seeds 1..N",
    )
    run_p.add_argument(
        "--csv-full-dist",
        action="store_true",
        help="append per-arm probability columns to each CSV row",
    )
    check_p = sub.add_parser("check", help="run a verification suite")
    check_p.add_argument(
        "--suite", required=True, choices=("solver", "drift", "bounds")
    )
    check_p.add_argument(
        "--quick",
        action="store_true",
        help="reduced instance counts and horizons for a fast smoke run",
    )
    return parser


def _cmd_run(args) -> int:
    from .harness import emit, load_config, monte_carlo

    config = load_config(args.config)
    if args.seeds is not None:
        if args.seeds < 1:
            print("--seeds must be a positive count", file=sys.stderr)
            return 2
        config = dataclasses.replace(config, seeds=tuple(range(1, args.seeds + 1)))
    out_dir = args.out or config.output or "results"
    report, traces = monte_carlo(config, keep_traces=True)
    paths = emit(report, traces, out_dir, csv_full_dist=args.csv_full_dist)
    for path in paths:
        print(f"wrote {path}")
    stderr_text = "n/a" if report.stderr is None else f"{report.stderr:.4f}"
    print(
        f"{config.setting}: mean regret {report.mean_regret:.4f} "
        f"(stderr {stderr_text}) over {len(report.regrets)} seeds"
    )
    print(f"best arm {report.best_arm}, tradeoff arm {report.tradeoff_arm}")
    status = "PASS" if report.bound_passed else "FAIL"
    print(f"[{status}] bound certificate: regret vs RHS {report.bound:.4f}")
    if report.assumption_violated:
        print(
            "note: assumption violated (configured rho_star below the realized "
            "maximum missing count); certificate skipped"
        )
    for failure in report.failures:
        print(f"episode failure: {failure}", file=sys.stderr)
    return 0 if report.passed else 1


def _cmd_check(args) -> int:
    ok = True
    if args.suite == "solver":
        from .oracle import derivative_battery, hedge_equivalence_battery, solver_battery

        per_family = 100 if args.quick else 500
        points = 50 if args.quick else 200
        reports = solver_battery(instances_per_family=per_family)
        reports.append(hedge_equivalence_battery(triples=points))
        reports.extend(derivative_battery(points=points))
        for report in reports:
            print(report.line())
            ok = ok and report.passed
    elif args.suite == "drift":
        from .oracle import drift_battery, estimator_battery

        per_learner = 200 if args.quick else 1000
        draws = 20_000 if args.quick else 100_000
        reports = drift_battery(instances_per_learner=per_learner)
        reports.extend(estimator_battery(draws=draws))
        for report in reports:
            print(report.line())
            ok = ok and report.passed
    else:
        from .harness import certificate_configs, monte_carlo

        for name, config in certificate_configs(quick=args.quick).items():
            report, _ = monte_carlo(config)
            passed = report.passed
            ok = ok and passed
            status = "PASS" if passed else "FAIL"
            print(
                f"[{status}] {name}: mean regret {report.mean_regret:.2f} "
                f"(max {report.regrets.max():.2f}) vs bound {report.bound:.2f} "
                f"over {len(report.regrets)} seeds"
            )
            if report.assumption_violated:
                print(f"  note: {name} ran outside its rho_star assumption")
            for failure in report.failures:
                print(f"  episode failure: {failure}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_check(args)


if __name__ == "__main__":
    sys.exit(main())
