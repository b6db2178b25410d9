"""Domain types and the raw single-stage allocation model.

Satellites split an integer-minute stage budget across the grids they can see.
Each grid carries an observation load; a minute of satellite ``i`` on grid
``j`` removes ``alpha[i, j]`` load units. The stage objective is the largest
remaining load over all grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import InputError

SatelliteId = str
GridId = str


@dataclass(frozen=True)
class TimeWindow:
    satellite: SatelliteId
    grid: GridId
    begin: int
    end: int

    def __post_init__(self):
        if not self.begin < self.end:
            raise InputError(
                f"window ({self.satellite}, {self.grid}) has begin {self.begin} >= end {self.end}"
            )

    def covers(self, start: int, length: int) -> bool:
        return self.begin <= start and self.end >= start + length


@dataclass(frozen=True, eq=True)
class Scenario:
    """A complete multi-stage problem instance.

    ``capacity`` is keyed by ``(satellite, grid, stage)`` and ``load`` by
    ``(grid, stage)``, where ``stage`` is the index produced by
    :func:`gridalloc.multistage.segment_timeline`. A stage without an entry
    inherits the most recent earlier entry; capacity then falls back to
    ``capacity_default`` and load to zero.
    """

    satellites: tuple[SatelliteId, ...]
    grids: tuple[GridId, ...]
    windows: tuple[TimeWindow, ...]
    capacity: Mapping[tuple[SatelliteId, GridId, int], float]
    load: Mapping[tuple[GridId, int], float]
    transfer_penalty: int = 0
    transition_constant: int = 1
    stage_length: int = 10
    horizon: tuple[int, int] = (0, 60)
    capacity_default: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "satellites", tuple(self.satellites))
        object.__setattr__(self, "grids", tuple(self.grids))
        object.__setattr__(self, "windows", tuple(self.windows))
        object.__setattr__(self, "horizon", tuple(self.horizon))
        object.__setattr__(self, "capacity", dict(self.capacity))
        object.__setattr__(self, "load", dict(self.load))
        self.validate()

    def validate(self) -> None:
        if len(self.satellites) < 1:
            raise InputError("scenario needs at least one satellite")
        if len(self.grids) < 1:
            raise InputError("scenario needs at least one grid")
        for label, ids in (("satellite", self.satellites), ("grid", self.grids)):
            if len(set(ids)) != len(ids):
                raise InputError(f"duplicate {label} ids")
        sats, grids = set(self.satellites), set(self.grids)
        start, end = self.horizon
        if not start < end:
            raise InputError(f"horizon {self.horizon} is empty")
        if self.transfer_penalty < 0:
            raise InputError("H must be >= 0")
        if self.transition_constant < 0:
            raise InputError("C must be >= 0")
        if self.stage_length < 1:
            raise InputError("dt must be >= 1")
        for k, w in enumerate(self.windows):
            if w.satellite not in sats or w.grid not in grids:
                raise InputError(f"windows[{k}] references unknown satellite/grid")
            if w.begin < start or w.end > end:
                raise InputError(f"windows[{k}] [{w.begin}, {w.end}] lies outside the horizon")
        for (s, g, k), a in self.capacity.items():
            if s not in sats or g not in grids:
                raise InputError(f"capacity[{s}, {g}, {k}] references unknown satellite/grid")
            if not a > 0:
                raise InputError(f"capacity[{s}, {g}, {k}] = {a} must be > 0")
        if self.capacity_default is not None and not self.capacity_default > 0:
            raise InputError("capacity default must be > 0")
        for (g, k), b in self.load.items():
            if g not in grids:
                raise InputError(f"load[{g}, {k}] references unknown grid")
            if b < 0:
                raise InputError(f"load of grid {g} at stage {k} is negative ({b})")

    @property
    def n(self) -> int:
        return len(self.satellites)

    @property
    def m(self) -> int:
        return len(self.grids)

    def alpha(self, satellite: SatelliteId, grid: GridId, stage: int) -> float:
        for k in range(stage, -1, -1):
            value = self.capacity.get((satellite, grid, k))
            if value is not None:
                return value
        if self.capacity_default is None:
            raise InputError(f"no capacity for ({satellite}, {grid}) at stage {stage}")
        return self.capacity_default

    def beta(self, grid: GridId, stage: int) -> float:
        for k in range(stage, -1, -1):
            value = self.load.get((grid, k))
            if value is not None:
                return value
        return 0.0


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class StageState:
    """One single-stage instance.

    Stored densely: ``alpha_matrix[i, j]`` is zero exactly where grid ``j`` is
    not visible to satellite ``i``. The mapping views required by callers
    (``visible_grids``, ``visible_sats``, ``alpha``, ``beta``, ``eta``) are
    derived from the arrays.
    """

    satellites: tuple[SatelliteId, ...]
    grids: tuple[GridId, ...]
    alpha_matrix: np.ndarray
    beta_vector: np.ndarray
    eta_vector: np.ndarray
    length: int
    transition_constant: int = 1
    index: int = 0
    start: int = 0
    _sat_pos: dict = field(init=False, repr=False, compare=False)
    _grid_pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n, m = len(self.satellites), len(self.grids)
        alpha = np.array(self.alpha_matrix, dtype=float).reshape(n, m)
        beta = np.array(self.beta_vector, dtype=float).reshape(m)
        eta = np.array(self.eta_vector, dtype=np.int64).reshape(n)
        if self.length < 1:
            raise InputError("stage length must be >= 1")
        if np.any(alpha < 0):
            raise InputError("capacities must be positive on visible pairs")
        if np.any(eta < 0) or np.any(eta > self.length):
            raise InputError("payload transfer times must lie in [0, stage length]")
        if self.transition_constant < 0:
            raise InputError("C must be >= 0")
        object.__setattr__(self, "satellites", tuple(self.satellites))
        object.__setattr__(self, "grids", tuple(self.grids))
        object.__setattr__(self, "alpha_matrix", _frozen(alpha))
        object.__setattr__(self, "beta_vector", _frozen(beta))
        object.__setattr__(self, "eta_vector", _frozen(eta))
        object.__setattr__(self, "_sat_pos", {s: i for i, s in enumerate(self.satellites)})
        object.__setattr__(self, "_grid_pos", {g: j for j, g in enumerate(self.grids)})

    @classmethod
    def build(
        cls,
        satellites: Sequence[SatelliteId],
        grids: Sequence[GridId],
        alpha: Mapping[tuple[SatelliteId, GridId], float],
        beta: Mapping[GridId, float],
        length: int,
        transition_constant: int = 1,
        eta: Mapping[SatelliteId, int] | None = None,
        index: int = 0,
        start: int = 0,
    ) -> "StageState":
        """Build a stage from sparse maps; ``alpha`` keys define visibility."""
        sat_pos = {s: i for i, s in enumerate(satellites)}
        grid_pos = {g: j for j, g in enumerate(grids)}
        mat = np.zeros((len(satellites), len(grids)))
        for (s, g), a in alpha.items():
            if s not in sat_pos or g not in grid_pos:
                raise InputError(f"alpha entry ({s}, {g}) references an unknown id")
            if not a > 0:
                raise InputError(f"alpha[{s}, {g}] = {a} must be > 0")
            mat[sat_pos[s], grid_pos[g]] = a
        bvec = np.array([float(beta.get(g, 0.0)) for g in grids])
        if np.any(bvec < 0):
            raise InputError("loads must be >= 0")
        evec = np.array([int((eta or {}).get(s, 0)) for s in satellites])
        return cls(tuple(satellites), tuple(grids), mat, bvec, evec, length,
                   transition_constant, index, start)

    def with_eta(self, eta: Mapping[SatelliteId, int] | np.ndarray) -> "StageState":
        if isinstance(eta, Mapping):
            eta = np.array([int(eta.get(s, 0)) for s in self.satellites])
        return replace(self, eta_vector=np.array(eta, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.satellites)

    @property
    def m(self) -> int:
        return len(self.grids)

    @property
    def visibility(self) -> np.ndarray:
        return self.alpha_matrix > 0

    @property
    def is_idle(self) -> bool:
        return not bool(self.visibility.any())

    def sat_index(self, satellite: SatelliteId) -> int:
        try:
            return self._sat_pos[satellite]
        except KeyError:
            raise InputError(f"unknown satellite {satellite!r}") from None

    def grid_index(self, grid: GridId) -> int:
        try:
            return self._grid_pos[grid]
        except KeyError:
            raise InputError(f"unknown grid {grid!r}") from None

    @property
    def visible_grids(self) -> dict[SatelliteId, frozenset[GridId]]:
        vis = self.visibility
        return {s: frozenset(self.grids[j] for j in np.flatnonzero(vis[i]))
                for i, s in enumerate(self.satellites)}

    @property
    def visible_sats(self) -> dict[GridId, frozenset[SatelliteId]]:
        vis = self.visibility
        return {g: frozenset(self.satellites[i] for i in np.flatnonzero(vis[:, j]))
                for j, g in enumerate(self.grids)}

    @property
    def alpha(self) -> dict[tuple[SatelliteId, GridId], float]:
        rows, cols = np.nonzero(self.visibility)
        return {(self.satellites[i], self.grids[j]): float(self.alpha_matrix[i, j])
                for i, j in zip(rows, cols)}

    @property
    def beta(self) -> dict[GridId, float]:
        return {g: float(b) for g, b in zip(self.grids, self.beta_vector)}

    @property
    def eta(self) -> dict[SatelliteId, int]:
        return {s: int(e) for s, e in zip(self.satellites, self.eta_vector)}

    def budget(self, i: int) -> int:
        """Minutes satellite ``i`` can spend on imaging and transitions."""
        return self.length - int(self.eta_vector[i])


@dataclass(frozen=True)
class Action:
    """One satellite's allocation: positive integer minutes per grid.

    The null action is the empty allocation.
    """

    owner: SatelliteId
    allocation: tuple[tuple[GridId, int], ...] = ()

    def __post_init__(self):
        items = dict(self.allocation)
        if len(items) != len(self.allocation):
            raise InputError(f"duplicate grid in allocation of {self.owner}")
        for g, x in items.items():
            if int(x) != x or x < 1:
                raise InputError(f"allocation of {self.owner} to {g} must be a positive integer, got {x}")
        object.__setattr__(self, "allocation", tuple(sorted((g, int(x)) for g, x in items.items())))

    @classmethod
    def from_dict(cls, owner: SatelliteId, allocation: Mapping[GridId, int]) -> "Action":
        return cls(owner, tuple((g, x) for g, x in allocation.items() if x != 0))

    @classmethod
    def null(cls, owner: SatelliteId) -> "Action":
        return cls(owner, ())

    def as_dict(self) -> dict[GridId, int]:
        return dict(self.allocation)

    @property
    def grids(self) -> frozenset[GridId]:
        return frozenset(g for g, _ in self.allocation)

    @property
    def total(self) -> int:
        return sum(x for _, x in self.allocation)

    @property
    def is_null(self) -> bool:
        return not self.allocation

    def x(self, grid: GridId) -> int:
        return dict(self.allocation).get(grid, 0)


@dataclass(frozen=True)
class AllocationFile:
    """The joint profile: one action per satellite, in stage satellite order."""

    actions: tuple[Action, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        owners = [a.owner for a in self.actions]
        if len(set(owners)) != len(owners):
            raise InputError("allocation file lists a satellite twice")

    def __getitem__(self, satellite: SatelliteId) -> Action:
        for a in self.actions:
            if a.owner == satellite:
                return a
        raise KeyError(satellite)

    def __iter__(self) -> Iterator[Action]:
        return iter(self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    @classmethod
    def null(cls, stage: StageState) -> "AllocationFile":
        return cls(tuple(Action.null(s) for s in stage.satellites))

    @classmethod
    def from_matrix(cls, stage: StageState, x: np.ndarray) -> "AllocationFile":
        x = np.asarray(x)
        actions = []
        for i, s in enumerate(stage.satellites):
            cols = np.flatnonzero(x[i])
            actions.append(Action(s, tuple((stage.grids[j], int(x[i, j])) for j in cols)))
        return cls(tuple(actions))

    def to_matrix(self, stage: StageState) -> np.ndarray:
        if len(self.actions) != stage.n:
            raise InputError(f"allocation file has {len(self.actions)} entries, stage has {stage.n} satellites")
        x = np.zeros((stage.n, stage.m), dtype=np.int64)
        for a in self.actions:
            i = stage.sat_index(a.owner)
            for g, v in a.allocation:
                x[i, stage.grid_index(g)] = v
        return x

    def replace_action(self, action: Action) -> "AllocationFile":
        return AllocationFile(tuple(action if a.owner == action.owner else a for a in self.actions))

    def satellites_on(self, grid: GridId) -> frozenset[SatelliteId]:
        return frozenset(a.owner for a in self.actions if a.x(grid) > 0)


def visible_grids(windows: Iterable[TimeWindow], t_k: int, dt: int) -> dict[SatelliteId, set[GridId]]:
    """Grids whose window covers the whole stage ``[t_k, t_k + dt]``, per satellite."""
    if dt < 1:
        raise InputError("dt must be >= 1")
    out: dict[SatelliteId, set[GridId]] = {}
    for w in windows:
        if w.covers(t_k, dt):
            out.setdefault(w.satellite, set()).add(w.grid)
    return out


def served_loads(stage: StageState, x: np.ndarray) -> np.ndarray:
    return (stage.alpha_matrix * x).sum(axis=0)


def remaining_loads(stage: StageState, x: np.ndarray) -> np.ndarray:
    return stage.beta_vector - served_loads(stage, x)


def remaining_load(stage: StageState, a: AllocationFile, grid: GridId) -> float:
    j = stage.grid_index(grid)
    y = stage.beta_vector[j]
    for action in a:
        x = action.x(grid)
        if x:
            y -= stage.alpha_matrix[stage.sat_index(action.owner), j] * x
    return float(y)


def imaging_transition_time(action: Action, C: int) -> int:
    return len(action.allocation) * C


def payload_transfer_time(prev_grids: Iterable[GridId], curr_grids: Iterable[GridId], H: int) -> int:
    """Slew penalty between consecutive stages.

    Zero when there is no previous pointing (stage 1 or an idle previous
    stage) or when the two grid sets overlap.
    """
    prev = set(prev_grids)
    if not prev or prev & set(curr_grids):
        return 0
    return H


def is_feasible_action(stage: StageState, action: Action) -> bool:
    i = stage.sat_index(action.owner)
    vis = stage.visibility[i]
    for g, _ in action.allocation:
        j = stage._grid_pos.get(g)
        if j is None or not vis[j]:
            return False
    used = action.total + imaging_transition_time(action, stage.transition_constant)
    return used + int(stage.eta_vector[i]) <= stage.length


def is_feasible(stage: StageState, a: AllocationFile) -> bool:
    if len(a) != stage.n or {act.owner for act in a} != set(stage.satellites):
        return False
    return all(is_feasible_action(stage, act) for act in a)


def check_feasible(stage: StageState, a: AllocationFile) -> None:
    if not is_feasible(stage, a):
        raise InputError("allocation file is infeasible for this stage")


def objective(stage: StageState, a: AllocationFile) -> float:
    """Largest remaining load over all grids (the min-max objective)."""
    check_feasible(stage, a)
    return float(remaining_loads(stage, a.to_matrix(stage)).max())
