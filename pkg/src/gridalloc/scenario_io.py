"""Scenario JSON serialization and synthetic scenario generation.

Schema::

    {
      "satellites": ["s1", ...],
      "grids": ["g1", ...],
      "windows": [{"sat": "s1", "grid": "g1", "begin_min": 0, "end_min": 30}, ...],
      "capacity": [{"sat": "s1", "grid": "g1", "stage": 0, "alpha": 2}, ...]
                  | {"default": 2.5, "entries": [...]},
      "load": [{"grid": "g1", "stage": 0, "beta": 40}, ...],
      "constants": {"H": 2, "C": 1, "dt": 10, "horizon": [0, 60]}
    }

Minutes are integers. Files written by :func:`dumps_scenario` round-trip
byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .model import Scenario, TimeWindow


class ScenarioError(InputError):
    pass


_TOP = {"satellites", "grids", "windows", "capacity", "load", "constants"}
_WINDOW = {"sat", "grid", "begin_min", "end_min"}
_CAPACITY = {"sat", "grid", "stage", "alpha"}
_LOAD = {"grid", "stage", "beta"}
_CONSTANTS = {"H", "C", "dt", "horizon"}


def _keys(obj, allowed: set[str], where: str, required: set[str] | None = None) -> None:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(extra)}")
    missing = (allowed if required is None else required) - set(obj)
    if missing:
        raise ScenarioError(f"{where}: missing field(s) {sorted(missing)}")


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{where}: expected an integer number of minutes, got {v!r}")
    return v


def _num(v, where: str):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {v!r}")
    return v


def scenario_from_dict(data) -> Scenario:
    _keys(data, _TOP, "scenario")
    windows = []
    for k, w in enumerate(data["windows"]):
        _keys(w, _WINDOW, f"windows[{k}]")
        b, e = _int(w["begin_min"], f"windows[{k}].begin_min"), _int(w["end_min"], f"windows[{k}].end_min")
        if not b < e:
            raise ScenarioError(f"windows[{k}]: begin_min {b} must be < end_min {e}")
        windows.append(TimeWindow(w["sat"], w["grid"], b, e))
    cap = data["capacity"]
    default = None
    if isinstance(cap, dict):
        _keys(cap, {"default", "entries"}, "capacity", required={"default"})
        default = _num(cap["default"], "capacity.default")
        cap = cap.get("entries", [])
    capacity = {}
    for k, c in enumerate(cap):
        _keys(c, _CAPACITY, f"capacity[{k}]")
        alpha = _num(c["alpha"], f"capacity[{k}].alpha")
        if not alpha > 0:
            raise ScenarioError(f"capacity[{k}]: alpha for ({c['sat']}, {c['grid']}) must be > 0")
        capacity[(c["sat"], c["grid"], _int(c["stage"], f"capacity[{k}].stage"))] = alpha
    load = {}
    for k, entry in enumerate(data["load"]):
        _keys(entry, _LOAD, f"load[{k}]")
        beta = _num(entry["beta"], f"load[{k}].beta")
        if beta < 0:
            raise ScenarioError(f"load[{k}]: negative beta {beta} for grid {entry['grid']}")
        load[(entry["grid"], _int(entry["stage"], f"load[{k}].stage"))] = beta
    const = data["constants"]
    _keys(const, _CONSTANTS, "constants")
    horizon = const["horizon"]
    if not (isinstance(horizon, list) and len(horizon) == 2):
        raise ScenarioError("constants.horizon: expected [start, end]")
    try:
        return Scenario(
            satellites=tuple(data["satellites"]),
            grids=tuple(data["grids"]),
            windows=tuple(windows),
            capacity=capacity,
            load=load,
            transfer_penalty=_int(const["H"], "constants.H"),
            transition_constant=_int(const["C"], "constants.C"),
            stage_length=_int(const["dt"], "constants.dt"),
            horizon=(_int(horizon[0], "constants.horizon[0]"), _int(horizon[1], "constants.horizon[1]")),
            capacity_default=default,
        )
    except ScenarioError:
        raise
    except InputError as exc:
        raise ScenarioError(str(exc)) from exc


def scenario_to_dict(scenario: Scenario) -> dict:
    entries = [{"sat": s, "grid": g, "stage": k, "alpha": a} for (s, g, k), a in scenario.capacity.items()]
    capacity = entries if scenario.capacity_default is None else {
        "default": scenario.capacity_default, "entries": entries}
    return {
        "satellites": list(scenario.satellites),
        "grids": list(scenario.grids),
        "windows": [{"sat": w.satellite, "grid": w.grid, "begin_min": w.begin, "end_min": w.end}
                    for w in scenario.windows],
        "capacity": capacity,
        "load": [{"grid": g, "stage": k, "beta": b} for (g, k), b in scenario.load.items()],
        "constants": {"H": scenario.transfer_penalty, "C": scenario.transition_constant,
                      "dt": scenario.stage_length, "horizon": list(scenario.horizon)},
    }


def loads_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return scenario_from_dict(data)
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    return loads_scenario(path.read_text(), str(path))


def dumps_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=1) + "\n"


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(scenario))


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of a synthetic scenario.

    Windows are not orbit-derived: each satellite/grid pair gets one window
    with probability ``visibility``, of a length drawn from ``window_len``
    and (with ``align``) snapped to stage boundaries. A window may start
    before the horizon, in which case it is clipped to the horizon start.
    Every satellite is guaranteed a window covering the first stage.
    """

    n: int = 25
    m: int = 9
    visibility: float = 0.5
    window_len: tuple[int, int] = (20, 60)
    beta_range: tuple[float, float] = (30, 80)
    alpha_range: tuple[float, float] = (2, 3)
    integral: bool = True
    H: int = 2
    C: int = 1
    dt: int = 10
    horizon: tuple[int, int] = (0, 60)
    load_growth: tuple[float, ...] = ()
    align: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise InputError("spec needs n >= 1 and m >= 1")
        for name in ("window_len", "beta_range", "alpha_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InputError(f"{name} is empty: {lo} > {hi}")
        if self.alpha_range[0] <= 0 or self.beta_range[0] < 0:
            raise InputError("capacities must be positive and loads non-negative")
        if not 0 <= self.visibility <= 1:
            raise InputError("visibility must be a probability")


PRESETS = {
    "regional": ScenarioSpec(n=25, m=9, visibility=0.8, window_len=(30, 60)),
    "global": ScenarioSpec(n=100, m=30, visibility=0.27, window_len=(30, 60)),
}


def preset_spec(name: str, seed: int = 0, **overrides) -> ScenarioSpec:
    try:
        base = PRESETS[name]
    except KeyError:
        raise InputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ScenarioSpec(**{**asdict(base), "seed": seed, **overrides})


def _draw(rng: np.random.Generator, lo, hi, integral: bool):
    if integral:
        return int(rng.integers(int(lo), int(hi) + 1))
    return float(rng.uniform(lo, hi))


def generate_scenario(spec: ScenarioSpec) -> Scenario:
    """Deterministic synthetic scenario for ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    sats = [f"s{i + 1}" for i in range(spec.n)]
    grids = [f"g{j + 1}" for j in range(spec.m)]
    start, end = spec.horizon
    unit = spec.dt if spec.align else 1
    lo_len, hi_len = spec.window_len
    windows: dict[tuple[int, int], tuple[int, int]] = {}
    for i in range(spec.n):
        for j in range(spec.m):
            if rng.random() >= spec.visibility:
                continue
            length = unit * int(rng.integers(-(-lo_len // unit), hi_len // unit + 1))
            length = max(length, unit)
            first = start - length + unit
            last = end - unit
            begin = first + unit * int(rng.integers(0, (last - first) // unit + 1))
            windows[(i, j)] = (max(begin, start), min(begin + length, end))
        if not any(b <= start and e >= start + spec.dt for (ii, _), (b, e) in windows.items() if ii == i):
            j = int(rng.integers(spec.m))
            length = unit * max(1, -(-max(lo_len, spec.dt) // unit))
            windows[(i, j)] = (start, min(start + length, end))
    window_list = [TimeWindow(sats[i], grids[j], b, e) for (i, j), (b, e) in sorted(windows.items())]
    capacity = {(sats[i], grids[j], 0): _draw(rng, *spec.alpha_range, spec.integral)
                for (i, j) in sorted(windows)}
    base_loads = [_draw(rng, *spec.beta_range, spec.integral) for _ in grids]
    load = {}
    growth = spec.load_growth or (1.0,)
    for k, factor in enumerate(growth):
        for g, b in zip(grids, base_loads):
            value = b * factor
            load[(g, k)] = int(round(value)) if spec.integral else float(value)
    return Scenario(tuple(sats), tuple(grids), tuple(window_list), capacity, load,
                    transfer_penalty=spec.H, transition_constant=spec.C, stage_length=spec.dt,
                    horizon=spec.horizon)
