"""Exhaustive ground truth for small stages.

Everything here scans the full joint action space; nothing is sampled or
approximated. Scans refuse to start when the joint space exceeds ``cap``.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple

import mpmath
import numpy as np

from .actions import ActionSpace, enumerate_actions
from .errors import CapacityError
from .model import AllocationFile, StageState, check_feasible, remaining_loads
from .potential import (
    local_utility,
    local_utility_rows,
    logsumexp_smooth,
    normalizer,
    potential,
    strictly_better,
)

DEFAULT_JOINT_CAP = 50_000_000
_OBJ_ATOL = 1e-9


@dataclass(frozen=True)
class OracleReport:
    optimum: float
    profiles: tuple[AllocationFile, ...]
    joint_size: int
    elapsed: float


def _spaces(stage: StageState, cap: int) -> tuple[list[ActionSpace], int]:
    spaces = [enumerate_actions(stage, s) for s in stage.satellites]
    size = math.prod(len(sp) for sp in spaces)
    if size > cap:
        raise CapacityError(f"joint action space has {size} profiles, above the cap of {cap}")
    return spaces, size


def _contributions(stage: StageState, spaces: list[ActionSpace]) -> list[np.ndarray]:
    out = []
    for i, sp in enumerate(spaces):
        c = np.zeros((len(sp), stage.m))
        c[:, sp.columns] = sp.matrix * stage.alpha_matrix[i, sp.columns]
        out.append(c)
    return out


def _scan(stage: StageState, spaces: list[ActionSpace], score: Callable[[np.ndarray], np.ndarray]):
    """Yield ``(index tuples, scores)`` blocks covering the joint space in lexicographic order.

    The last satellite (or last two) are broadcast; the rest are looped.
    """
    contrib = _contributions(stage, spaces)
    n = len(spaces)
    tail = contrib[-1] if n == 1 else (contrib[-2][:, None, :] + contrib[-1][None, :, :]).reshape(-1, stage.m)
    tail_dims = [len(spaces[-1])] if n == 1 else [len(spaces[-2]), len(spaces[-1])]
    head = [range(len(sp)) for sp in spaces[: n - len(tail_dims)]]
    for prefix in itertools.product(*head):
        base = sum((contrib[i][k] for i, k in enumerate(prefix)), np.zeros(stage.m))
        y = stage.beta_vector - (base + tail)
        yield prefix, tail_dims, score(y)


def _profile(stage: StageState, spaces: list[ActionSpace], ks: tuple[int, ...]) -> AllocationFile:
    return AllocationFile(tuple(sp.action(int(k)) for sp, k in zip(spaces, ks)))


def _argbest(stage, spaces, score, max_profiles):
    """Minimum score and the lexicographically first index tuples within tolerance of it."""
    best = math.inf
    hits: list[tuple[int, ...]] = []
    for prefix, tail_dims, s in _scan(stage, spaces, score):
        lo = float(s.min())
        if lo < best - _OBJ_ATOL:
            best, hits = lo, []
        if lo <= best + _OBJ_ATOL:
            for flat in np.flatnonzero(s <= best + _OBJ_ATOL):
                if len(hits) >= max_profiles:
                    break
                hits.append(prefix + tuple(int(v) for v in np.unravel_index(flat, tail_dims)))
    return best, hits


def brute_force_optimum(stage: StageState, cap: int = DEFAULT_JOINT_CAP,
                        max_profiles: int = 100) -> OracleReport:
    """Exact minimum of the largest remaining load over every feasible joint profile."""
    t0 = time.perf_counter()
    spaces, size = _spaces(stage, cap)
    best, hits = _argbest(stage, spaces, lambda y: y.max(axis=1), max_profiles)
    profiles = tuple(_profile(stage, spaces, ks) for ks in hits)
    return OracleReport(best, profiles, size, time.perf_counter() - t0)


def brute_force_utility_optimum(stage: StageState, eps: float, cap: int = DEFAULT_JOINT_CAP,
                                candidates: int = 10_000) -> AllocationFile:
    """The joint profile maximizing the global utility at temperature ``eps``.

    A double-precision scan of the smoothed objective keeps every profile
    within 1e-9 of the best; those near-ties are then compared in arbitrary
    precision, so grids with tiny weights still break ties exactly.
    """
    spaces, _ = _spaces(stage, cap)

    def score(y):
        top = y.max(axis=1)
        return top + eps * np.log(np.exp((y - top[:, None]) / eps).sum(axis=1))

    best = math.inf
    near: list[tuple[float, tuple[int, ...]]] = []
    tol = lambda b: 1e-9 * max(1.0, abs(b))  # noqa: E731
    for prefix, tail_dims, s in _scan(stage, spaces, score):
        lo = float(s.min())
        if lo < best:
            best = lo
            near = [c for c in near if c[0] <= best + tol(best)]
        for flat in np.flatnonzero(s <= best + tol(best)):
            near.append((float(s[flat]), prefix + tuple(int(v) for v in np.unravel_index(flat, tail_dims))))
        if len(near) > candidates:
            raise CapacityError("too many near-tied utility maximizers to resolve exactly")
    near = [c for c in near if c[0] <= best + tol(best)]
    contrib = _contributions(stage, spaces)
    spread = float(stage.beta_vector.max() - stage.beta_vector.min()) + sum(float(c.max()) for c in contrib)
    with mpmath.workdps(40 + int(spread / (eps * math.log(10)))):
        def exact(ks):
            y = stage.beta_vector - sum(contrib[i][k] for i, k in enumerate(ks))
            return mpmath.fsum(mpmath.exp(mpmath.mpf(float(v)) / eps) for v in y)
        winner = min(near, key=lambda c: (exact(c[1]), c[1]))[1]
    return _profile(stage, spaces, winner)


def improving_deviation(stage: StageState, a: AllocationFile, eps: float):
    """First ``(satellite, action)`` that strictly raises its local utility, or ``None``."""
    check_feasible(stage, a)
    x = a.to_matrix(stage)
    log_p = normalizer(stage, eps).log_value
    served = (stage.alpha_matrix * x).sum(axis=0)
    for i, s in enumerate(stage.satellites):
        sp = enumerate_actions(stage, s)
        alpha_i = stage.alpha_matrix[i, sp.columns]
        others = (stage.beta_vector - served)[sp.columns] + alpha_i * x[i, sp.columns]
        values = local_utility_rows(alpha_i, others, sp.matrix, eps, log_p)
        inc = sp.index_of(x[i, sp.columns])
        better = np.flatnonzero(strictly_better(values, values[inc]))
        if better.size:
            return s, sp.action(int(better[0]))
    return None


def is_nash_equilibrium(stage: StageState, a: AllocationFile, eps: float) -> bool:
    """No satellite has a strictly better action anywhere in its full space."""
    if stage.is_idle:
        return True
    return improving_deviation(stage, a, eps) is None


class PotentialCheck(NamedTuple):
    max_abs: float
    max_rel: float


def check_exact_potential(stage: StageState, eps: float, samples: int,
                          rng: np.random.Generator) -> PotentialCheck:
    """Largest gap between local-utility and potential differences on random deviations.

    Each sample draws a satellite, a random profile for everyone else and two
    actions for the satellite. The relative gap is taken against the largest
    magnitude among the four compared values.
    """
    spaces = [enumerate_actions(stage, s) for s in stage.satellites]
    norm = normalizer(stage, eps)
    worst_abs = worst_rel = 0.0
    for _ in range(samples):
        i = int(rng.integers(stage.n))
        base = [sp.action(int(rng.integers(len(sp)))) for sp in spaces]
        sp = spaces[i]
        a1 = list(base)
        a2 = list(base)
        a1[i] = sp.action(int(rng.integers(len(sp))))
        a2[i] = sp.action(int(rng.integers(len(sp))))
        f1, f2 = AllocationFile(tuple(a1)), AllocationFile(tuple(a2))
        s = stage.satellites[i]
        u1, u2 = local_utility(stage, f1, s, eps, norm), local_utility(stage, f2, s, eps, norm)
        p1, p2 = potential(stage, f1, eps, norm), potential(stage, f2, eps, norm)
        gap = abs((u1 - u2) - (p1 - p2))
        scale = max(abs(u1), abs(u2), abs(p1), abs(p2))
        worst_abs = max(worst_abs, gap)
        if scale > 0:
            worst_rel = max(worst_rel, gap / scale)
    return PotentialCheck(worst_abs, worst_rel)


def sandwich_bound_check(stage: StageState, a: AllocationFile, eps: float) -> tuple[float, float, float]:
    """``(max_j y_j, h(x), max_j y_j + eps * log m)``; ordered for every profile."""
    check_feasible(stage, a)
    y = remaining_loads(stage, a.to_matrix(stage))
    lower = float(y.max())
    return lower, logsumexp_smooth(y, eps), lower + eps * math.log(stage.m)
