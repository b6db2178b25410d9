"""Timeline segmentation and chained stage-by-stage allocation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .actions import greedy_matrix
from .errors import InputError
from .learning import IterationTrace, LearnerConfig, run_learner
from .model import AllocationFile, Scenario, StageState, payload_transfer_time, visible_grids


@dataclass(frozen=True)
class StageSchedule:
    stages: tuple[StageState, ...]

    def __len__(self) -> int:
        return len(self.stages)

    def __iter__(self):
        return iter(self.stages)

    def __getitem__(self, k: int) -> StageState:
        return self.stages[k]

    @property
    def starts(self) -> list[int]:
        return [s.start for s in self.stages]


def change_points(scenario: Scenario) -> list[int]:
    start, end = scenario.horizon
    pts = {t for w in scenario.windows for t in (w.begin, w.end)}
    return sorted(t for t in pts if start < t < end)


def segment_timeline(scenario: Scenario) -> StageSchedule:
    """Cut the horizon into stages of at most ``dt`` minutes.

    A stage ends early at the next window begin/end so that visibility is
    constant inside every stage. Capacity and load tables are looked up by
    the resulting stage index. Stages nobody can see into are kept (idle).
    """
    start, end = scenario.horizon
    dt = scenario.stage_length
    if dt > end - start:
        raise InputError(f"stage length {dt} exceeds the horizon {scenario.horizon}")
    cuts = change_points(scenario)
    stages = []
    t, k = start, 0
    while t < end:
        nxt = min([t + dt, end] + [c for c in cuts if c > t])
        length = nxt - t
        vis = visible_grids(scenario.windows, t, length)
        alpha = {(s, g): scenario.alpha(s, g, k) for s, gs in vis.items() for g in gs}
        beta = {g: scenario.beta(g, k) for g in scenario.grids}
        stages.append(StageState.build(scenario.satellites, scenario.grids, alpha, beta, length,
                                       scenario.transition_constant, index=k, start=t))
        t, k = nxt, k + 1
    return StageSchedule(tuple(stages))


def chain_transition_times(prev: AllocationFile | None, stage: StageState, H: int) -> dict[str, int]:
    """Per-satellite slew penalty charged up front for ``stage``.

    The penalty is ``H`` when the satellite allocated something last stage
    and none of those grids is visible now, else zero. Capped at the stage
    length.
    """
    vis = stage.visible_grids
    eta = {}
    for s in stage.satellites:
        before = prev[s].grids if prev is not None else frozenset()
        eta[s] = min(payload_transfer_time(before, vis[s], H), stage.length)
    return eta


def _warm_start(stage: StageState, prev: AllocationFile) -> AllocationFile:
    """Previous allocation trimmed to what is still feasible, then greedily topped up."""
    x = np.zeros((stage.n, stage.m), dtype=np.int64)
    C = stage.transition_constant
    for i, s in enumerate(stage.satellites):
        budget = stage.budget(i)
        for g, v in prev[s].allocation:
            j = stage.grid_index(g)
            if not stage.visibility[i, j]:
                continue
            take = min(v, budget - C)
            if take >= 1:
                x[i, j] = take
                budget -= take + C
    top = greedy_matrix(_residual_stage(stage, x))
    return AllocationFile.from_matrix(stage, x + top)


def _residual_stage(stage: StageState, x: np.ndarray) -> StageState:
    """Stage seen by a greedy top-up of ``x``: loads net of ``x``, budgets net of its cost."""
    used = x.sum(axis=1) + (x > 0).sum(axis=1) * stage.transition_constant
    beta = np.maximum(stage.beta_vector - (stage.alpha_matrix * x).sum(axis=0), 0.0)
    alpha = np.where(x > 0, 0.0, stage.alpha_matrix)
    return replace(stage, alpha_matrix=alpha, beta_vector=beta,
                   eta_vector=np.minimum(stage.eta_vector + used, stage.length))


@dataclass
class StageResult:
    stage: StageState
    allocation: AllocationFile
    objective: float
    eta: dict[str, int]
    trace: IterationTrace
    elapsed: float


@dataclass
class DgapResult:
    stages: list[StageResult] = field(default_factory=list)

    @property
    def objectives(self) -> list[float]:
        return [r.objective for r in self.stages]


def stage_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng([seed, k])


def run_dgap(scenario: Scenario, config: LearnerConfig, warm_start: bool = False,
             schedule: StageSchedule | None = None) -> DgapResult:
    """Solve the stages in order, charging each stage's slew penalty from the last allocation.

    Every stage starts from the greedy allocation of its own state and draws
    from its own generator ``default_rng([seed, k])``. ``warm_start`` seeds
    the start from the previous allocation instead, which couples stages even
    when ``H = 0``.
    """
    schedule = schedule or segment_timeline(scenario)
    result = DgapResult()
    prev: AllocationFile | None = None
    for base in schedule:
        k = base.index
        try:
            eta = chain_transition_times(prev, base, scenario.transfer_penalty)
            stage = base.with_eta(eta)
            t0 = time.perf_counter()
            initial = _warm_start(stage, prev) if warm_start and prev is not None else None
            alloc, trace = run_learner(stage, config, initial=initial, rng=stage_rng(config.seed, k))
            elapsed = time.perf_counter() - t0
        except (InputError, ValueError) as exc:
            raise InputError(f"stage {k}: {exc}") from exc
        obj = float((stage.beta_vector - (stage.alpha_matrix * alloc.to_matrix(stage)).sum(axis=0)).max())
        result.stages.append(StageResult(stage, alloc, obj, eta, trace, elapsed))
        prev = alloc
    return result
