"""Feasible action spaces, greedy initialization, sampled subsets and better replies."""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import CapacityError
from .model import Action, AllocationFile, StageState
from .potential import local_utility_rows, normalizer, strictly_better

DEFAULT_ACTION_CAP = 200_000


@lru_cache(maxsize=None)
def _compositions(total_max: int, parts: int) -> np.ndarray:
    """Rows of ``parts`` positive ints with sum <= ``total_max``, in lexicographic order."""
    if parts == 0:
        return np.zeros((1, 0), dtype=np.int64)
    blocks = []
    for first in range(1, total_max - (parts - 1) + 1):
        rest = _compositions(total_max - first, parts - 1)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    if not blocks:
        return np.zeros((0, parts), dtype=np.int64)
    out = np.vstack(blocks)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ActionSpace:
    """All feasible actions of one satellite in a stage.

    ``matrix`` holds one row per action over the satellite's visible grids
    (``columns`` are stage grid indices). Row 0 is the null action; rows are
    ordered by support size, then grid order, then minute values.
    """

    owner: str
    columns: np.ndarray
    matrix: np.ndarray
    grids: tuple[str, ...]

    def __post_init__(self):
        self.matrix.flags.writeable = False

    @cached_property
    def _index(self) -> dict[bytes, int]:
        return {row.tobytes(): k for k, row in enumerate(self.matrix)}

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def index_of(self, row: np.ndarray) -> int:
        """Position of a dense allocation row (restricted to ``columns``)."""
        return self._index[np.ascontiguousarray(row, dtype=np.int64).tobytes()]

    def action(self, k: int) -> Action:
        row = self.matrix[k]
        return Action(self.owner, tuple((self.grids[c], int(v)) for c, v in enumerate(row) if v))

    @cached_property
    def actions(self) -> list[Action]:
        return [self.action(k) for k in range(len(self))]

    def position(self, action: Action) -> int:
        alloc = action.as_dict()
        row = np.array([alloc.pop(g, 0) for g in self.grids], dtype=np.int64)
        if alloc:
            raise KeyError(f"action uses grids outside the space: {sorted(alloc)}")
        return self.index_of(row)


def enumerate_actions(stage: StageState, satellite, cap: int = DEFAULT_ACTION_CAP) -> ActionSpace:
    """Every integer-minute allocation the satellite can afford, null action first."""
    i = stage.sat_index(satellite)
    cols = np.flatnonzero(stage.visibility[i])
    budget = stage.budget(i)
    per_grid = 1 + stage.transition_constant
    blocks = [np.zeros((1, len(cols)), dtype=np.int64)]
    count = 1
    for size in range(1, len(cols) + 1):
        if size * per_grid > budget:
            break
        comps = _compositions(budget - size * stage.transition_constant, size)
        for subset in combinations(range(len(cols)), size):
            count += len(comps)
            if count > cap:
                raise CapacityError(
                    f"satellite {satellite} has more than {cap} feasible actions; "
                    "use a coarser time granularity or raise the cap"
                )
            block = np.zeros((len(comps), len(cols)), dtype=np.int64)
            block[:, list(subset)] = comps
            blocks.append(block)
    matrix = np.vstack(blocks)
    return ActionSpace(satellite, cols, matrix, tuple(stage.grids[c] for c in cols))


_SPACE_CACHE: "weakref.WeakKeyDictionary[StageState, list[ActionSpace]]" = weakref.WeakKeyDictionary()


def stage_action_spaces(stage: StageState, cap: int = DEFAULT_ACTION_CAP) -> list[ActionSpace]:
    """Action spaces of every satellite, built once per stage object and shared."""
    spaces = _SPACE_CACHE.get(stage)
    if spaces is None:
        spaces = [enumerate_actions(stage, s, cap) for s in stage.satellites]
        _SPACE_CACHE[stage] = spaces
    return spaces


def greedy_matrix(stage: StageState) -> np.ndarray:
    """Dense greedy initial allocation (see :func:`greedy_init`)."""
    x = np.zeros((stage.n, stage.m), dtype=np.int64)
    remaining = stage.beta_vector.astype(float).copy()
    C = stage.transition_constant
    for i in range(stage.n):
        cols = np.flatnonzero(stage.visibility[i])
        budget = stage.budget(i)
        while cols.size:
            cost = np.where(x[i, cols] > 0, 1, 1 + C)
            ok = cols[cost <= budget]
            if ok.size == 0:
                break
            # argmax keeps the first (lowest-index) grid on ties
            j = ok[int(np.argmax(remaining[ok]))]
            budget -= 1 if x[i, j] > 0 else 1 + C
            x[i, j] += 1
            remaining[j] -= stage.alpha_matrix[i, j]
    return x


def greedy_init(stage: StageState) -> AllocationFile:
    """Deterministic greedy start.

    Satellites go in stage order; each spends its budget one minute at a time
    on the visible grid with the largest current remaining load, paying ``C``
    when it opens a grid it has not used yet.
    """
    return AllocationFile.from_matrix(stage, greedy_matrix(stage))


def sample_indices(size: int, omega: float, rng: np.random.Generator, incumbent: int) -> np.ndarray:
    """Indices of a sampled subset of ``ceil(omega * size)`` actions incl. the incumbent.

    ``omega >= 1`` returns every index without touching ``rng``.
    """
    if not 0 < omega:
        raise ValueError(f"omega must be in (0, 1], got {omega}")
    if omega >= 1:
        return np.arange(size)
    k = max(1, math.ceil(omega * size - 1e-12))
    if k >= size:
        return np.arange(size)
    picks = rng.choice(size - 1, size=k - 1, replace=False)
    picks = picks + (picks >= incumbent)
    return np.concatenate(([incumbent], picks))


def sample_action_subset(space: ActionSpace, omega: float, rng: np.random.Generator,
                         incumbent: Action | None = None) -> list[Action]:
    inc = 0 if incumbent is None else space.position(incumbent)
    return [space.action(int(k)) for k in sample_indices(len(space), omega, rng, inc)]


def better_reply_set(stage: StageState, a: AllocationFile, satellite, subset: Sequence[Action],
                     eps: float) -> list[Action]:
    """Members of ``subset`` that strictly raise the satellite's local utility."""
    i = stage.sat_index(satellite)
    x = a.to_matrix(stage)
    cols = np.flatnonzero(stage.visibility[i])
    grid_col = {stage.grids[c]: k for k, c in enumerate(cols)}
    rows = np.zeros((len(subset) + 1, cols.size), dtype=np.int64)
    rows[0] = x[i, cols]
    for r, act in enumerate(subset, start=1):
        for g, v in act.allocation:
            rows[r, grid_col[g]] = v
    served = (stage.alpha_matrix * x).sum(axis=0) - stage.alpha_matrix[i] * x[i]
    others = (stage.beta_vector - served)[cols]
    log_p = normalizer(stage, eps).log_value
    values = local_utility_rows(stage.alpha_matrix[i, cols], others, rows, eps, log_p)
    mask = strictly_better(values[1:], values[0])
    return [act for act, keep in zip(subset, mask) if keep]
