"""Seeded experiment runs, statistics, sweeps and CSV/JSON export."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .actions import stage_action_spaces
from .errors import CapacityError, InputError
from .learning import IterationTrace, LearnerConfig, ScheduleParams, Variant, run_learner
from .model import Scenario, StageState
from .multistage import run_dgap, segment_timeline
from .oracle import brute_force_optimum
from .scenario_io import scenario_from_dict, scenario_to_dict

SUMMARY_COLUMNS = ("variant", "worst", "best", "mean", "time_s", "variance", "n_best")
TRACE_COLUMNS = ("iteration", "actor", "epsilon", "accepted", "objective", "potential")
ORACLE_AUTO_CAP = 2_000_000
_MATCH_ATOL = 1e-9


@dataclass(frozen=True)
class RunRecord:
    seed: int
    objective: float
    time_s: float
    iterations: int
    trace: IterationTrace = field(repr=False, compare=False)


@dataclass(frozen=True)
class RunStats:
    """Table-style summary of a batch of runs.

    ``variance`` is the population variance. ``n_best`` counts runs that hit
    the oracle optimum when one is known (``n_best_mode == "oracle"``), else
    runs that hit the best value seen in the batch (``"observed"``); both
    counts are kept.
    """

    worst: float
    best: float
    mean: float
    variance: float
    time_s: float
    n_best: int
    n_best_mode: str
    n_best_observed: int
    n_best_oracle: int | None
    runs: int


def compute_stats(records: list[RunRecord], optimum: float | None = None) -> RunStats:
    if not records:
        raise ValueError("no run records")
    obj = np.array([r.objective for r in records], dtype=float)
    best = float(obj.min())
    observed = int(np.sum(np.abs(obj - best) <= _MATCH_ATOL))
    oracle = None if optimum is None else int(np.sum(np.abs(obj - optimum) <= _MATCH_ATOL))
    return RunStats(
        worst=float(obj.max()),
        best=best,
        mean=float(obj.mean()),
        variance=float(obj.var()),
        time_s=float(np.mean([r.time_s for r in records])),
        n_best=observed if oracle is None else oracle,
        n_best_mode="observed" if oracle is None else "oracle",
        n_best_observed=observed,
        n_best_oracle=oracle,
        runs=len(records),
    )


@dataclass
class Experiment:
    label: str
    config: LearnerConfig
    seeds: list[int]
    records: list[RunRecord]
    stats: RunStats
    optimum: float | None = None

    def convergence(self) -> list[tuple[int, float, float, float]]:
        """``(iteration, mean, min, max)`` of the objective across runs.

        Runs that stopped early keep contributing their final value.
        """
        traces = [r.trace for r in self.records]
        length = max((len(t) for t in traces), default=0)
        rows = []
        for k in range(length):
            vals = [t.objective[k] if k < len(t) else (t.objective[-1] if len(t) else t.initial_objective)
                    for t in traces]
            rows.append((k + 1, float(np.mean(vals)), float(min(vals)), float(max(vals))))
        return rows


def _final_objective(trace: IterationTrace) -> float:
    return trace.objective[-1] if len(trace) else trace.initial_objective


def _one_run(stage: StageState, config: LearnerConfig) -> RunRecord:
    stage_action_spaces(stage)
    t0 = time.perf_counter()
    _, trace = run_learner(stage, config)
    elapsed = time.perf_counter() - t0
    return RunRecord(config.seed, float(_final_objective(trace)), elapsed, len(trace), trace)


def _one_run_args(args):
    return _one_run(*args)


def oracle_optimum(stage: StageState, oracle: str | float | None = "auto",
                   cap: int = ORACLE_AUTO_CAP) -> float | None:
    """Certified optimum for N_best counting: ``"auto"`` tries the oracle under ``cap``."""
    if oracle is None or oracle == "off":
        return None
    if oracle == "auto":
        try:
            return brute_force_optimum(stage, cap=cap, max_profiles=1).optimum
        except CapacityError:
            return None
    return float(oracle)


def run_experiment(stage: StageState | Scenario, config: LearnerConfig, runs: int = 50,
                   oracle: str | float | None = "auto", workers: int = 1,
                   label: str | None = None) -> Experiment:
    """``runs`` learner executions with seeds ``config.seed, config.seed + 1, ...``.

    A scenario is reduced to its first stage. Action spaces are built before
    the clock starts, so ``time_s`` measures the learning loop only.
    """
    if runs < 1:
        raise InputError(f"runs must be >= 1, got {runs}")
    if isinstance(stage, Scenario):
        stage = segment_timeline(stage)[0]
    seeds = [config.seed + r for r in range(runs)]
    jobs = [(stage, replace(config, seed=s)) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one_run_args, jobs))
    else:
        records = [_one_run(*job) for job in jobs]
    records.sort(key=lambda r: r.seed)
    optimum = oracle_optimum(stage, oracle)
    return Experiment(label or config.variant.value, config, seeds, records,
                      compute_stats(records, optimum), optimum)


def run_dgap_experiment(scenario: Scenario, config: LearnerConfig, runs: int = 50,
                        warm_start: bool = False, label: str | None = None) -> list[Experiment]:
    """Repeated multistage runs, summarized stage by stage."""
    if runs < 1:
        raise InputError(f"runs must be >= 1, got {runs}")
    schedule = segment_timeline(scenario)
    seeds = [config.seed + r for r in range(runs)]
    per_stage: list[list[RunRecord]] = [[] for _ in schedule]
    for s in seeds:
        result = run_dgap(scenario, replace(config, seed=s), warm_start=warm_start, schedule=schedule)
        for k, st in enumerate(result.stages):
            per_stage[k].append(RunRecord(s, st.objective, st.elapsed, len(st.trace), st.trace))
    base = label or config.variant.value
    return [Experiment(f"{base}/stage{k}", config, seeds, recs, compute_stats(recs))
            for k, recs in enumerate(per_stage)]


def run_sweep(stage: StageState | Scenario, config: LearnerConfig, param: str, values, runs: int = 50,
              workers: int = 1) -> list[Experiment]:
    """One experiment per value of a schedule field (e.g. ``tau``) or ``theta``."""
    out = []
    for v in values:
        if param == "theta":
            cfg = replace(config, theta=float(v))
        elif param in ScheduleParams.__dataclass_fields__:
            kind = int if param == "t_max" else float
            cfg = replace(config, schedules=replace(config.schedules, **{param: kind(v)}))
        else:
            raise InputError(f"cannot sweep {param!r}")
        out.append(run_experiment(stage, cfg, runs, oracle="off", workers=workers,
                                  label=f"{config.variant.value}/{param}={v:g}"))
    return out


def sweep_values(start: float, stop: float, step: float) -> list[float]:
    if step <= 0:
        raise InputError("sweep step must be > 0")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(count)]


def config_to_dict(config: LearnerConfig) -> dict:
    return {"variant": config.variant.value, "schedules": asdict(config.schedules),
            "theta": config.theta, "seed": config.seed, "early_stop": config.early_stop}


def config_from_dict(data: dict) -> LearnerConfig:
    return LearnerConfig(variant=Variant(data["variant"]), schedules=ScheduleParams(**data["schedules"]),
                         theta=data["theta"], seed=data["seed"], early_stop=data["early_stop"])


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in label)


def versions() -> dict:
    import scipy

    from . import __version__

    return {"gridalloc": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def emit_results(experiments: list[Experiment], outdir, scenario: Scenario | None = None,
                 command: str = "run", extra: dict | None = None, traces: bool = True) -> dict[str, Path]:
    """Write ``summary.csv``, per-run traces, convergence curves and ``run.json``."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {outdir}: {exc.strerror or exc}") from exc
    paths = {"summary": outdir / "summary.csv", "manifest": outdir / "run.json"}
    _write_csv(paths["summary"], SUMMARY_COLUMNS,
               [(e.label, e.stats.worst, e.stats.best, e.stats.mean, e.stats.time_s,
                 e.stats.variance, e.stats.n_best) for e in experiments])
    for e in experiments:
        name = _safe(e.label)
        _write_csv(outdir / f"convergence_{name}.csv", ("iteration", "mean", "min", "max"), e.convergence())
        if not traces:
            continue
        for r in e.records:
            t = r.trace
            rows = zip(range(1, len(t) + 1), t.actor, t.epsilon, t.accepted, t.objective, t.potential)
            _write_csv(outdir / f"trace_{name}-{r.seed}.csv", TRACE_COLUMNS, rows)
    manifest = {
        "command": command,
        "versions": versions(),
        "variance": "population",
        "scenario": None if scenario is None else scenario_to_dict(scenario),
        "experiments": [{
            "label": e.label,
            "config": config_to_dict(e.config),
            "runs": len(e.seeds),
            "seeds": e.seeds,
            "optimum": e.optimum,
            "stats": asdict(e.stats),
        } for e in experiments],
        **(extra or {}),
    }
    try:
        paths["manifest"].write_text(json.dumps(manifest, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {paths['manifest']}: {exc.strerror or exc}") from exc
    return paths


def replay(manifest_path, outdir) -> list[Experiment]:
    """Re-run everything a ``run.json`` describes and emit it again into ``outdir``.

    Every output except the wall-clock columns comes out identical.
    """
    path = Path(manifest_path)
    try:
        manifest = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    scenario = scenario_from_dict(manifest["scenario"])
    command = manifest["command"]
    exps = manifest["experiments"]
    if command == "dgap":
        first = exps[0]
        base = first["label"].rsplit("/stage", 1)[0]
        results = run_dgap_experiment(scenario, config_from_dict(first["config"]), first["runs"],
                                      warm_start=manifest.get("warm_start", False), label=base)
    else:
        stage = segment_timeline(scenario)[0]
        results = []
        for e in exps:
            oracle = "off" if e["optimum"] is None else e["optimum"]
            results.append(run_experiment(stage, config_from_dict(e["config"]), e["runs"],
                                          oracle=oracle, label=e["label"]))
    extra = {k: v for k, v in manifest.items() if k not in ("command", "versions", "variance",
                                                             "scenario", "experiments")}
    emit_results(results, outdir, scenario, command=command, extra=extra)
    return results
