"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 numerical failure (solver
non-convergence above the configured fraction of a population, or failed
experiment cells).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from kkt_indicator.evolver import EaConfig, random_population, run_ea
from kkt_indicator.experiment import (
    SCHEMA_VERSION,
    ConfigError,
    ExperimentConfig,
    MetricsConfig,
    aggregate_runs,
    run_experiment,
    score_population,
    write_artifacts,
)
from kkt_indicator.indicators import IndicatorConfig
from kkt_indicator.io import PopulationError, load_population, population_csv
from kkt_indicator.problems import get_problem
from kkt_indicator.stationarity import residuals

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def _problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", required=True, help="dtlz1 ... dtlz5")
    p.add_argument("--m", type=int, default=3, help="number of objectives")
    p.add_argument("--k", type=int, default=None, help="distance variables (default 5 for dtlz1, else 10)")


def _gradient_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gradient-mode", choices=["analytic", "fd"], default="analytic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kkt-indicator", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ind = sub.add_parser("indicator", help="score one population with H_adap, H_old, delta_p and HV")
    _problem_args(ind)
    src = ind.add_mutually_exclusive_group(required=True)
    src.add_argument("--population", type=Path, help="population file (csv or json)")
    src.add_argument("--generate", choices=["random", "refdir-ea"], help="generate the population instead")
    ind.add_argument("--format", choices=["csv", "json"], help="population file format (default: from suffix)")
    ind.add_argument("--config", type=Path, help="JSON with indicator/metrics blocks or alpha/beta/epsilon keys")
    ind.add_argument("--alpha", type=float)
    ind.add_argument("--beta", type=float)
    ind.add_argument("--epsilon", type=float)
    ind.add_argument("--seed", type=int, default=0)
    ind.add_argument("--failure-fraction", type=float, default=0.05)
    ind.add_argument("--output-dir", type=Path, help="write report.json here instead of stdout")
    _gradient_arg(ind)

    res = sub.add_parser("residuals", help="per-solution stationarity residuals")
    _problem_args(res)
    res.add_argument("--population", type=Path, required=True)
    res.add_argument("--format", choices=["csv", "json"], default="csv", help="output format")
    res.add_argument("--output-dir", type=Path)
    _gradient_arg(res)

    fs = sub.add_parser("front-sample", help="sample the true Pareto front")
    _problem_args(fs)
    fs.add_argument("--count", type=int, default=100)
    fs.add_argument("--seed", type=int, default=0)
    fs.add_argument("--format", choices=["csv", "json"], default="csv")
    fs.add_argument("--output-dir", type=Path)

    ex = sub.add_parser("experiment", help="seeded multi-run experiment with mean(std) tables")
    ex.add_argument("--config", type=Path, help="experiment JSON (default: DTLZ1-5, m=12, refdir-ea, 30 runs)")
    ex.add_argument("--seed", type=int, help="master seed")
    ex.add_argument("--output-dir", type=Path)
    ex.add_argument("--runs", type=int)
    ex.add_argument("--workers", type=int)
    ex.add_argument("--gradient-mode", choices=["analytic", "fd"])
    return parser


def _emit(text: str, output_dir: Path | None, name: str) -> None:
    if output_dir is None:
        sys.stdout.write(text)
        return
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / name).write_text(text)


def _indicator_settings(args) -> tuple[IndicatorConfig, MetricsConfig]:
    data: dict = {}
    metrics = MetricsConfig()
    if args.config:
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{args.config}: {exc}") from None
        data = dict(doc.get("indicator", {k: v for k, v in doc.items() if k != "metrics"}))
        if "metrics" in doc:
            metrics = MetricsConfig.from_dict(doc["metrics"])
    for key in ("alpha", "beta", "epsilon"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    return IndicatorConfig.from_dict(data), metrics


def cmd_indicator(args) -> int:
    problem = get_problem(args.problem, args.m, args.k)
    indicator, metrics = _indicator_settings(args)
    if args.population is not None:
        X, F = load_population(args.population, problem, args.format)
        algorithm, seed = f"external:{args.population}", None
    elif args.generate == "random":
        X = random_population(problem, EaConfig().population_size, args.seed)
        F = problem.evaluate(X)
        algorithm, seed = "random", args.seed
    else:
        trace = run_ea(problem, EaConfig(seed=args.seed))
        X, F, algorithm, seed = trace.final_population, trace.final_objectives, "refdir-ea", args.seed
    run = score_population(problem, X, F, indicator, metrics, args.gradient_mode, seed)
    run["numerical_failure"] = run["solver_failures"] > args.failure_fraction * X.shape[0]
    agg = {}
    for key in ("h_adap", "h_old", "delta_p", "hv"):
        mean, std = aggregate_runs([run[key]])
        agg[key] = {"mean": mean, "std": std}
    agg["runs_ok"], agg["runs_failed"] = 1, 0
    report = {
        "schema_version": SCHEMA_VERSION,
        "problem": {"id": problem.name, "m": problem.m, "k": problem.k},
        "algorithm": algorithm,
        "config": {
            "indicator": indicator.to_dict(),
            "metrics": metrics.to_dict(),
            "gradient_mode": args.gradient_mode,
            "failure_fraction": args.failure_fraction,
        },
        "runs": [run],
        "aggregate": agg,
    }
    _emit(json.dumps(report, indent=2) + "\n", args.output_dir, "report.json")
    if run["numerical_failure"]:
        print(f"error: {run['solver_failures']} of {X.shape[0]} QP solves did not converge", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_residuals(args) -> int:
    problem = get_problem(args.problem, args.m, args.k)
    X, _ = load_population(args.population, problem)
    rs = residuals(problem, X, args.gradient_mode)
    if args.format == "csv":
        lines = ["index,residual,converged"] + [
            f"{i},{v!r},{int(c)}" for i, (v, c) in enumerate(zip(rs.values.tolist(), rs.converged))
        ]
        _emit("\n".join(lines) + "\n", args.output_dir, "residuals.csv")
    else:
        doc = {"residuals": rs.values.tolist(), "converged": rs.converged.tolist()}
        _emit(json.dumps(doc) + "\n", args.output_dir, "residuals.json")
    return EXIT_OK


def cmd_front_sample(args) -> int:
    problem = get_problem(args.problem, args.m, args.k)
    F = problem.sample_front(args.count, args.seed)
    if args.format == "csv":
        _emit(population_csv(F, x_prefix="f"), args.output_dir, "front.csv")
    else:
        _emit(json.dumps({"f": F.tolist()}) + "\n", args.output_dir, "front.json")
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.output_dir is not None:
        overrides["output"] = str(args.output_dir)
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.gradient_mode is not None:
        overrides["gradient_mode"] = args.gradient_mode
    config = replace(config, **overrides)
    table = run_experiment(config)
    for path in write_artifacts(table, config.output):
        print(path)
    if table.failed:
        print("error: some experiment cells failed; see summary.json", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


COMMANDS = {
    "indicator": cmd_indicator,
    "residuals": cmd_residuals,
    "front-sample": cmd_front_sample,
    "experiment": cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (PopulationError, ConfigError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
