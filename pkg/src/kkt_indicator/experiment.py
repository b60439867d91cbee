"""Seeded multi-run experiments producing mean(std) tables of all four metrics."""

from __future__ import annotations

import glob
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from kkt_indicator.evolver import EaConfig, random_population, run_ea
from kkt_indicator.indicators import IndicatorConfig, indicator_report
from kkt_indicator.io import load_population
from kkt_indicator.problems import Problem, get_problem
from kkt_indicator.refmetrics import HvConfig, ReferenceFront, delta_p, hypervolume_exact_2d, hypervolume_mc
from kkt_indicator.stationarity import residuals

SCHEMA_VERSION = "1.0"
METRICS = ("h_adap", "h_old", "delta_p", "hv")
TABLE_COLUMNS = ["algorithm"] + [f"{k}_{s}" for k in METRICS for s in ("mean", "std")]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    m: int
    k: int | None = None

    def build(self) -> Problem:
        return get_problem(self.id, self.m, self.k)

    @property
    def label(self) -> str:
        return f"{self.id}_m{self.m}"


@dataclass(frozen=True)
class MetricsConfig:
    p: float = 2.0
    reference_size: int = 5000
    reference_seed: int = 0
    hv_samples: int = 100_000

    def to_dict(self) -> dict:
        return {
            "delta_p": {"p": self.p, "reference_size": self.reference_size, "reference_seed": self.reference_seed},
            "hv": {"samples": self.hv_samples},
        }

    @classmethod
    def from_dict(cls, data: dict) -> MetricsConfig:
        dp, hv = data.get("delta_p", {}), data.get("hv", {})
        return cls(
            p=float(dp.get("p", 2.0)),
            reference_size=int(dp.get("reference_size", 5000)),
            reference_seed=int(dp.get("reference_seed", 0)),
            hv_samples=int(hv.get("samples", 100_000)),
        )


DEFAULT_PROBLEMS = tuple(ProblemSpec(f"dtlz{i}", 12) for i in range(1, 6))


@dataclass(frozen=True)
class ExperimentConfig:
    problems: tuple[ProblemSpec, ...] = DEFAULT_PROBLEMS
    algorithms: tuple[str, ...] = ("refdir-ea",)
    runs: int = 30
    ea: EaConfig = field(default_factory=EaConfig)
    indicator: IndicatorConfig = field(default_factory=IndicatorConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    gradient_mode: str = "analytic"
    output: str = "results"
    master_seed: int = 0
    workers: int = 1
    failure_fraction: float = 0.05

    def validate(self) -> None:
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.problems:
            raise ConfigError("no problems configured")
        for spec in self.problems:
            try:
                spec.build()
            except (KeyError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
        if self.gradient_mode not in ("analytic", "fd", "finite_difference"):
            raise ConfigError(f"unknown gradient mode {self.gradient_mode!r}")
        for algo in self.algorithms:
            if algo in ("refdir-ea", "random"):
                continue
            if not algo.startswith("external:"):
                raise ConfigError(f"unknown algorithm {algo!r}")
            for spec in self.problems:
                files = external_files(algo, spec)
                if len(files) < self.runs:
                    raise ConfigError(
                        f"{algo}: pattern resolves to {len(files)} file(s) for {spec.id}, need {self.runs}"
                    )

    def to_dict(self) -> dict:
        return {
            "problems": [{"id": s.id, "m": s.m, "k": s.k} for s in self.problems],
            "algorithms": list(self.algorithms),
            "runs": self.runs,
            "ea": {k: v for k, v in self.ea.to_dict().items() if k != "seed"},
            "indicator": self.indicator.to_dict(),
            "metrics": self.metrics.to_dict(),
            "gradient_mode": self.gradient_mode,
            "master_seed": self.master_seed,
            "failure_fraction": self.failure_fraction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        kwargs: dict = {}
        try:
            if "problems" in data:
                kwargs["problems"] = tuple(
                    ProblemSpec(str(p["id"]).lower(), int(p.get("m", 12)), p.get("k")) for p in data["problems"]
                )
            if "algorithms" in data:
                kwargs["algorithms"] = tuple(str(a) for a in data["algorithms"])
            for key in ("runs", "master_seed", "workers"):
                if key in data:
                    kwargs[key] = int(data[key])
            for key in ("gradient_mode", "output"):
                if key in data:
                    kwargs[key] = str(data[key])
            if "failure_fraction" in data:
                kwargs["failure_fraction"] = float(data["failure_fraction"])
            if "ea" in data:
                kwargs["ea"] = EaConfig.from_dict(data["ea"])
            if "indicator" in data:
                kwargs["indicator"] = IndicatorConfig.from_dict(data["indicator"])
            if "metrics" in data:
                kwargs["metrics"] = MetricsConfig.from_dict(data["metrics"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from None
        unknown = set(data) - {
            "problems", "algorithms", "runs", "ea", "indicator", "metrics",
            "gradient_mode", "output", "master_seed", "workers", "failure_fraction",
        }
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data)


def external_files(algorithm: str, spec: ProblemSpec) -> list[str]:
    """Files for an ``external:<pattern>`` algorithm, sorted; ``{problem}`` and ``{m}`` expand."""
    pattern = algorithm.split(":", 1)[1].format(problem=spec.id, m=spec.m)
    return sorted(glob.glob(pattern))


def run_seed(master_seed: int, problem_index: int, algorithm_index: int, run_index: int) -> int:
    """Independent per-run seed derived from the master seed and the run's position."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(problem_index, algorithm_index, run_index))
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def aggregate_runs(values) -> tuple[float, float]:
    """Arithmetic mean and sample (N - 1) standard deviation; std is 0 for one value."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(v))
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return mean, std


def reference_front(problem: Problem, metrics: MetricsConfig) -> ReferenceFront:
    return ReferenceFront.for_problem(problem, metrics.reference_size, metrics.reference_seed)


def score_population(
    problem: Problem,
    X: np.ndarray,
    F: np.ndarray,
    indicator: IndicatorConfig,
    metrics: MetricsConfig,
    gradient_mode: str,
    seed: int | None,
    front: ReferenceFront | None = None,
) -> dict:
    """All four metrics plus residual diagnostics for one approximation set."""
    rs = residuals(problem, X, gradient_mode)
    old, adap = indicator_report(rs, indicator)
    front = front or reference_front(problem, metrics)
    if problem.m == 2:
        hv = hypervolume_exact_2d(
            (np.asarray(F) - front.ideal) / (front.nadir - front.ideal), np.ones(2)
        )
    else:
        hv = hypervolume_mc(F, front, HvConfig(samples=metrics.hv_samples, seed=seed or 0))
    s = rs.values
    return {
        "seed": seed,
        "h_adap": adap.value,
        "h_old": old.value,
        "degenerate": adap.degenerate,
        "delta_p": delta_p(F, front, metrics.p),
        "hv": hv,
        "residual_stats": {
            "n": int(s.size),
            "min": float(s.min()),
            "median": float(np.median(s)),
            "max": float(s.max()),
            "q_lo": adap.band.q_lo,
            "q_hi": adap.band.q_hi,
            "alpha": indicator.alpha,
            "beta": indicator.beta,
        },
        "solver_failures": rs.failures,
    }


def _approximation_set(config: ExperimentConfig, spec: ProblemSpec, algorithm: str, run: int, seed: int):
    problem = spec.build()
    if algorithm == "refdir-ea":
        trace = run_ea(problem, replace(config.ea, seed=seed))
        return trace.final_population, trace.final_objectives
    if algorithm == "random":
        X = random_population(problem, config.ea.population_size, seed)
        return X, problem.evaluate(X)
    return load_population(external_files(algorithm, spec)[run], problem)


def _run_cell(args) -> dict:
    config, pi, ai, run = args
    spec, algorithm = config.problems[pi], config.algorithms[ai]
    seed = run_seed(config.master_seed, pi, ai, run)
    try:
        X, F = _approximation_set(config, spec, algorithm, run, seed)
        problem = spec.build()
        record = score_population(
            problem, X, F, config.indicator, config.metrics, config.gradient_mode, seed,
            reference_front(problem, config.metrics),
        )
        record["numerical_failure"] = record["solver_failures"] > config.failure_fraction * X.shape[0]
        return record
    except Exception as exc:  # recorded per cell; the experiment continues
        return {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}


@dataclass
class ExperimentTable:
    """Per-(problem, algorithm) raw runs and aggregates."""

    config: ExperimentConfig
    runs: dict[tuple[str, str], list[dict]]

    def aggregate(self, problem: str, algorithm: str) -> dict:
        ok = [r for r in self.runs[(problem, algorithm)] if "error" not in r]
        out: dict = {}
        for key in METRICS:
            mean, std = aggregate_runs([r[key] for r in ok])
            out[key] = {"mean": None if math.isnan(mean) else mean, "std": None if math.isnan(std) else std}
        out["runs_ok"] = len(ok)
        out["runs_failed"] = len(self.runs[(problem, algorithm)]) - len(ok)
        return out

    @property
    def failed(self) -> bool:
        return any("error" in r or r.get("numerical_failure") for rs in self.runs.values() for r in rs)


def run_experiment(config: ExperimentConfig) -> ExperimentTable:
    """Score every (problem, algorithm, run) cell; results are in run-index order."""
    config.validate()
    jobs = [
        (config, pi, ai, r)
        for pi in range(len(config.problems))
        for ai in range(len(config.algorithms))
        for r in range(config.runs)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_cell, jobs))
    else:
        records = [_run_cell(job) for job in jobs]
    runs: dict[tuple[str, str], list[dict]] = {}
    for (_, pi, ai, _), rec in zip(jobs, records):
        runs.setdefault((config.problems[pi].label, config.algorithms[ai]), []).append(rec)
    return ExperimentTable(config, runs)


def format_sci(v: float | None) -> str:
    """``7.01e-2`` style: two decimals, exponent without padding."""
    if v is None or not math.isfinite(v):
        return "nan"
    mantissa, exp = f"{v:.2e}".split("e")
    return f"{mantissa}e{int(exp):+d}"


def _num(v: float | None) -> str:
    return "nan" if v is None else repr(float(v))


def write_artifacts(table: ExperimentTable, output: str | Path) -> list[Path]:
    """Write per-problem table CSVs, "mean (std)" formatted tables, and JSON reports."""
    out = Path(output)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    written = []
    cfg = table.config
    summary = {"schema_version": SCHEMA_VERSION, "config": cfg.to_dict(), "failures": []}
    for spec in cfg.problems:
        numeric = [",".join(TABLE_COLUMNS)]
        pretty = ["algorithm,h_adap,h_old,delta_p,hv"]
        for algo in cfg.algorithms:
            agg = table.aggregate(spec.label, algo)
            numeric.append(
                ",".join([algo] + [_num(agg[k][s]) for k in METRICS for s in ("mean", "std")])
            )
            pretty.append(
                ",".join(
                    [algo] + [f"{format_sci(agg[k]['mean'])} ({format_sci(agg[k]['std'])})" for k in METRICS]
                )
            )
            report = {
                "schema_version": SCHEMA_VERSION,
                "problem": {"id": spec.id, "m": spec.m, "k": spec.build().k},
                "algorithm": algo,
                "config": cfg.to_dict(),
                "runs": table.runs[(spec.label, algo)],
                "aggregate": agg,
            }
            path = out / "reports" / f"{spec.label}__{_slug(algo)}.json"
            path.write_text(json.dumps(report, indent=2) + "\n")
            written.append(path)
            for i, r in enumerate(table.runs[(spec.label, algo)]):
                if "error" in r or r.get("numerical_failure"):
                    summary["failures"].append(
                        {"problem": spec.label, "algorithm": algo, "run": i,
                         "reason": r.get("error", "solver non-convergence above threshold")}
                    )
        for name, lines in ((f"{spec.label}.csv", numeric), (f"{spec.label}_formatted.csv", pretty)):
            path = out / "tables" / name
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    written.append(path)
    return written


def _slug(algorithm: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in algorithm)
