"""Experiment harness: repeated timed runs, summaries and serial/parallel comparison."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import EvalBackend, Objective
from .engine import MgfwaConfig, RunRecord, SearchSpace, run
from .nets import MlpBlackBox, Sphere, build_net, get_spec, net_from_json

logger = logging.getLogger(__name__)

TRACE_HEADER = ["run_id", "batch", "evals", "wall_ms", "best_fitness"]
SUMMARY_HEADER = ["checkpoint_ms", "mean_best", "std_best", "runs"]

# Fields that must agree between the two sides of a comparison.
ALGORITHM_FIELDS = ("net", "sphere", "net_file", "weight_seed", "fireworks", "sparks", "boosts",
                    "sigma", "amp_amplify", "amp_reduce", "amp_init", "bounds", "budget_ms",
                    "budget_evals", "runs", "seed")


@dataclass
class ExperimentConfig:
    net: int | None = None
    sphere: int | None = None
    net_file: str | None = None
    weight_seed: int = 0
    mode: str = "parallel"
    workers: int | None = None
    batches: int = 8
    fireworks: int = 5
    sparks: int = 30
    boosts: tuple[float, ...] = (1.0, 2.0, 4.0)
    sigma: float = 0.2
    amp_amplify: float = 1.2
    amp_reduce: float = 0.9
    amp_init: float | None = None
    bounds: tuple[float, float] = (-5.0, 5.0)
    budget_ms: float | None = None
    budget_evals: int | None = None
    runs: int = 8
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        self.boosts = tuple(float(b) for b in self.boosts)
        self.bounds = (float(self.bounds[0]), float(self.bounds[1]))
        if sum(x is not None for x in (self.net, self.sphere, self.net_file)) != 1:
            raise ValueError("choose exactly one objective: net, sphere or net_file")
        if self.net is not None:
            get_spec(self.net)
        if self.sphere is not None and int(self.sphere) < 1:
            raise ValueError("sphere dimension must be positive")
        if self.mode not in ("serial", "parallel"):
            raise ValueError(f"mode must be 'serial' or 'parallel', got {self.mode!r}")
        if self.mode == "serial":
            if (self.workers or 1) != 1 or self.batches != 1:
                logger.info("serial mode forces workers=1 and batches=1")
            self.workers = 1
            self.batches = 1
        elif self.workers is None:
            self.workers = os.cpu_count() or 1
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.runs < 1:
            raise ValueError("runs must be positive")
        if self.budget_ms is None and self.budget_evals is None:
            raise ValueError("set budget_ms and/or budget_evals")
        self.algorithm()  # validate

    @property
    def label(self) -> str:
        if self.net is not None:
            return f"net{self.net}"
        if self.sphere is not None:
            return f"sphere{self.sphere}"
        return Path(self.net_file).stem

    def algorithm(self) -> MgfwaConfig:
        return MgfwaConfig(
            batches=self.batches, fireworks=self.fireworks, sparks=self.sparks,
            boosts=self.boosts, sigma=self.sigma, amp_amplify=self.amp_amplify,
            amp_reduce=self.amp_reduce, initial_amplitude=self.amp_init,
            max_evaluations=self.budget_evals, wall_clock_ms=self.budget_ms,
        )

    def objective(self) -> Objective:
        if self.sphere is not None:
            return Sphere(int(self.sphere))
        if self.net_file is not None:
            return net_from_json(Path(self.net_file).read_text())
        return build_net(get_spec(self.net), weight_seed=self.weight_seed)

    def backend(self) -> EvalBackend:
        if self.mode == "serial":
            return EvalBackend.serial()
        return EvalBackend.data_parallel(self.workers)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["boosts"] = list(self.boosts)
        d["bounds"] = list(self.bounds)
        return d


def _space_for(cfg: ExperimentConfig, objective) -> SearchSpace:
    dim = objective.dim
    return SearchSpace.box(dim, *cfg.bounds)


def warm_up(objective: Objective, space: SearchSpace, backend: EvalBackend) -> None:
    """Trigger kernel compilation and pool start-up before any clock starts."""
    rows = np.repeat(space.lower[None, :], max(backend.workers, 2), axis=0)
    backend.evaluate(objective, rows)
    backend.nan_count = 0


def run_experiment(cfg: ExperimentConfig, objective: Objective | None = None) -> list[RunRecord]:
    """``cfg.runs`` independent runs with seeds ``seed, seed + 1, ...``, one after another."""
    objective = objective if objective is not None else cfg.objective()
    space = _space_for(cfg, objective)
    algo = cfg.algorithm()
    records = []
    with cfg.backend() as backend:
        warm_up(objective, space, backend)
        for r in range(cfg.runs):
            rec = run(algo, space, objective, backend, seed=cfg.seed + r)
            logger.info("%s %s run %d: best %.6g after %d evals", cfg.label, cfg.mode, r,
                        rec.final_fitness.min(), rec.total_evaluations)
            records.append(rec)
    return records


def trace_rows(records: list[RunRecord]) -> list[tuple[int, int, int, float, float]]:
    """Flatten run records into ``(run_id, batch, evals, wall_ms, best_fitness)`` rows.

    ``wall_ms`` is rounded to microseconds here, once, so the written file and
    any summary computed from these rows agree exactly.
    """
    rows = []
    for run_id, rec in enumerate(records):
        for b in range(rec.batches):
            for t in range(len(rec.wall_ms)):
                rows.append((run_id, b, int(rec.evals[t, b]), round(float(rec.wall_ms[t]), 3),
                             float(rec.best_fitness[t, b])))
    return rows


def _run_curves(rows) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per run: wall times and best fitness over all batches at those times."""
    by_run: dict[int, dict[float, float]] = {}
    for run_id, _b, _e, wall, best in rows:
        cur = by_run.setdefault(run_id, {})
        cur[wall] = min(cur.get(wall, math.inf), best)
    curves = {}
    for run_id, pts in by_run.items():
        walls = np.array(sorted(pts))
        vals = np.minimum.accumulate(np.array([pts[w] for w in walls]))
        curves[run_id] = (walls, vals)
    return curves


def checkpoint_grid(rows_list, n: int = 24) -> np.ndarray:
    """Log-spaced wall-clock checkpoints covering every run in ``rows_list``.

    Starts when the slowest run has finished initialization and ends at the
    latest sample of any run.
    """
    firsts, lasts = [], []
    for rows in rows_list:
        for walls, _ in _run_curves(rows).values():
            firsts.append(walls[0])
            lasts.append(walls[-1])
    lo = max(max(firsts), 1e-3)
    hi = max(max(lasts), lo)
    if hi <= lo:
        return np.array([lo])
    return np.geomspace(lo, hi, n)


def summarize(rows, checkpoints=None) -> list[tuple[float, float, float, int]]:
    """Mean and sample standard deviation of each run's best fitness at each checkpoint.

    A run's value at time ``t`` is the best over its batches of the last
    sample taken at or before ``t``.
    """
    curves = _run_curves(rows)
    if checkpoints is None:
        checkpoints = checkpoint_grid([rows])
    out = []
    for t in checkpoints:
        vals = []
        for walls, best in curves.values():
            i = np.searchsorted(walls, t, side="right") - 1
            vals.append(best[max(i, 0)])
        vals = np.array(vals)
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        if not np.isfinite(std):
            std = 0.0
        out.append((float(t), float(np.mean(vals)), std, len(vals)))
    return out


def write_trace_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for run_id, b, e, wall, best in rows:
            w.writerow([run_id, b, e, f"{wall:.3f}", repr(best)])


def write_summary_csv(path: Path, summary) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for t, mean, std, n in summary:
            w.writerow([repr(t), repr(mean), repr(std), n])


def read_trace_csv(path: Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        return [(int(r[0]), int(r[1]), int(r[2]), float(r[3]), float(r[4])) for r in reader]


def throughput(records: list[RunRecord]) -> float:
    """Evaluations per second over all runs."""
    evals = sum(r.total_evaluations for r in records)
    secs = sum(float(r.wall_ms[-1]) for r in records) / 1e3
    return evals / secs if secs > 0 else math.inf


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[RunRecord]
    rows: list = field(repr=False)
    summary: list

    @property
    def evals_per_second(self) -> float:
        return throughput(self.records)


def execute(cfg: ExperimentConfig, objective: Objective | None = None,
            checkpoints=None) -> ExperimentResult:
    records = run_experiment(cfg, objective)
    rows = trace_rows(records)
    return ExperimentResult(cfg, records, rows, summarize(rows, checkpoints))


def mismatched_fields(a: ExperimentConfig, b: ExperimentConfig) -> list[str]:
    return [f for f in ALGORITHM_FIELDS if getattr(a, f) != getattr(b, f)]


def first_crossing(summary, threshold: float) -> float | None:
    for t, mean, _std, _n in summary:
        if mean <= threshold:
            return t
    return None


def default_thresholds(*summaries, count: int = 3) -> list[float]:
    """Levels between the worst starting mean and the best final mean."""
    start = max(s[0][1] for s in summaries)
    end = min(s[-1][1] for s in summaries)
    if not (np.isfinite(start) and np.isfinite(end)) or end >= start:
        return [end]
    return [float(start - (start - end) * q) for q in np.linspace(0.5, 1.0, count)]


def compare(serial_cfg: ExperimentConfig, parallel_cfg: ExperimentConfig,
            objective: Objective | None = None, thresholds=None) -> dict:
    """Run both modes and collect throughput, curves and threshold crossings."""
    if serial_cfg.mode != "serial" or parallel_cfg.mode != "parallel":
        raise ValueError("compare needs one serial and one parallel configuration")
    bad = mismatched_fields(serial_cfg, parallel_cfg)
    if bad:
        raise ValueError(f"algorithm parameters differ between modes: {', '.join(bad)}")
    if objective is None:
        objective = serial_cfg.objective()
    ser = execute(serial_cfg, objective)
    par = execute(parallel_cfg, objective)
    grid = checkpoint_grid([ser.rows, par.rows])
    ser.summary = summarize(ser.rows, grid)
    par.summary = summarize(par.rows, grid)
    if thresholds is None:
        thresholds = default_thresholds(ser.summary, par.summary)
    ratio = par.evals_per_second / ser.evals_per_second if ser.evals_per_second else math.inf
    return {
        "serial": ser,
        "parallel": par,
        "report": {
            "objective": serial_cfg.label,
            "serial_evals_per_second": ser.evals_per_second,
            "parallel_evals_per_second": par.evals_per_second,
            "speedup": ratio,
            "parallel_workers": parallel_cfg.workers,
            "parallel_batches": parallel_cfg.batches,
            "thresholds": [
                {"threshold": thr,
                 "serial_ms": first_crossing(ser.summary, thr),
                 "parallel_ms": first_crossing(par.summary, thr)}
                for thr in thresholds
            ],
            "final_mean_best": {"serial": ser.summary[-1][1], "parallel": par.summary[-1][1]},
        },
    }


def write_curve(path: Path, summary) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wall_ms", "best_fitness"])
        for t, mean, _std, _n in summary:
            w.writerow([repr(t), repr(mean)])


def write_report(path: Path, report: dict) -> None:
    path.write_text(json.dumps(report, indent=2) + "\n")
