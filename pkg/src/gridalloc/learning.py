"""Selective time-variant better-reply learning and its ablation variants."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .actions import ActionSpace, greedy_matrix, sample_indices, stage_action_spaces
from .errors import InputError
from .model import AllocationFile, StageState, check_feasible
from .potential import (
    TIE_RTOL,
    local_utility_rows,
    logsumexp_smooth,
    normalizer,
    potential_from_h,
    strictly_better,
)


class Variant(str, Enum):
    SETVBRP = "setvbrp"
    TVBRP = "tvbrp"
    SEBRP = "sebrp"
    BRP = "brp"
    BRA = "bra"

    @property
    def time_variant(self) -> bool:
        return self in (Variant.SETVBRP, Variant.TVBRP)

    @property
    def selective(self) -> bool:
        return self in (Variant.SETVBRP, Variant.SEBRP)


@dataclass(frozen=True)
class ScheduleParams:
    eps_upper: float = 15.4
    eps_lower: float = 1.0
    xi: float = 0.1
    tau: float = 0.5
    omega_lower: float = 0.06
    omega_upper: float = 1.0
    phi_ratio: float = 0.005
    t_max: int = 500


@dataclass(frozen=True)
class LearnerConfig:
    variant: Variant = Variant.SETVBRP
    schedules: ScheduleParams = field(default_factory=ScheduleParams)
    theta: float = 0.2
    seed: int = 0
    early_stop: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0 <= self.theta < 1:
            raise ValueError(f"inertia must be in [0, 1), got {self.theta}")

    @property
    def inertia(self) -> float:
        return 0.0 if self.variant is Variant.BRA else self.theta

    def epsilon(self, t: int) -> float:
        if self.variant.time_variant:
            return epsilon_schedule(t, self.schedules)
        return self.schedules.eps_upper

    def omega(self, t: int) -> float:
        if self.variant.selective:
            return omega_schedule(t, self.schedules)
        return 1.0

    def floor_iteration(self) -> int:
        """First iteration at which the temperature reaches its final (lowest) value."""
        p = self.schedules
        if p.t_max < 1:
            return 1
        eps = [self.epsilon(t) for t in range(1, p.t_max + 1)]
        return 1 + eps.index(min(eps))


def epsilon_schedule(t: int, p: ScheduleParams) -> float:
    """Piecewise-linear nonincreasing temperature: hold, decay at rate ``xi``, floor."""
    start = p.tau * p.t_max
    if t <= start:
        return p.eps_upper
    return max(p.eps_upper - (t - start) * p.xi, p.eps_lower)


def omega_schedule(t: int, p: ScheduleParams) -> float:
    """Sampled fraction of the action space, ``t * phi`` clamped to ``[omega_L, omega_U]``."""
    return min(max(t * p.phi_ratio, p.omega_lower), p.omega_upper)


class ScheduleWarning(UserWarning):
    pass


def validate_schedules(p: ScheduleParams, warn: bool = True) -> list[str]:
    """Assumption checks on the schedules, by direct sweep over ``1..t_max``.

    Returns violations; conditions that are legal but suspicious (a sampled
    fraction that never reaches its upper bound) are emitted as warnings.
    """
    out = []
    if p.eps_lower < 0 or p.eps_lower > p.eps_upper:
        out.append(f"temperature bounds require 0 <= eps_L <= eps_U, got eps_L={p.eps_lower}, eps_U={p.eps_upper}")
    elif p.eps_lower == 0:
        out.append("eps_L must be > 0 for the smoothed utility to exist")
    if not 0 < p.omega_lower <= p.omega_upper <= 1:
        out.append(f"sampling bounds require 0 < omega_L <= omega_U <= 1, got {p.omega_lower}, {p.omega_upper}")
    if p.xi <= 0:
        out.append(f"decay rate xi must be > 0, got {p.xi}")
    if p.phi_ratio < 0:
        out.append(f"growth rate phi must be >= 0, got {p.phi_ratio}")
    if not 0 <= p.tau <= 1:
        out.append(f"tau must be in [0, 1], got {p.tau}")
    prev_eps = prev_omega = None
    lo_e, hi_e = min(p.eps_lower, p.eps_upper), max(p.eps_lower, p.eps_upper)
    for t in range(1, p.t_max + 1):
        e, w = epsilon_schedule(t, p), omega_schedule(t, p)
        if prev_eps is not None and e > prev_eps:
            out.append(f"temperature increases at t={t}")
            break
        if prev_omega is not None and w < prev_omega:
            out.append(f"sampled fraction decreases at t={t}")
            break
        if not lo_e <= e <= hi_e or not p.omega_lower <= w <= p.omega_upper:
            out.append(f"schedule leaves its bounds at t={t}")
            break
        prev_eps, prev_omega = e, w
    if warn and p.phi_ratio == 0 and p.omega_lower < p.omega_upper:
        warnings.warn("phi = 0: the sampled fraction never grows past omega_L", ScheduleWarning, stacklevel=2)
    return out


@dataclass(frozen=True)
class StepRecord:
    t: int
    satellite: str
    epsilon: float
    omega: float
    n_sampled: int
    n_better: int
    accepted: bool
    objective: float
    potential: float


@dataclass
class IterationTrace:
    objective: list[float] = field(default_factory=list)
    potential: list[float] = field(default_factory=list)
    epsilon: list[float] = field(default_factory=list)
    actor: list[str] = field(default_factory=list)
    accepted: list[bool] = field(default_factory=list)
    initial_objective: float = math.nan
    final: AllocationFile | None = None
    floor_iteration: int = 1
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.objective)

    @property
    def last_improvement(self) -> int:
        """Last iteration at which the objective strictly dropped (0 if never)."""
        best, last = self.initial_objective, 0
        for t, v in enumerate(self.objective, start=1):
            if v < best:
                best, last = v, t
        return last

    def append(self, rec: StepRecord) -> None:
        self.objective.append(rec.objective)
        self.potential.append(rec.potential)
        self.epsilon.append(rec.epsilon)
        self.actor.append(rec.satellite)
        self.accepted.append(rec.accepted)


class Learner:
    """Mutable state of one learning run over a fixed stage."""

    def __init__(self, stage: StageState, config: LearnerConfig, initial: np.ndarray | None = None,
                 rng: np.random.Generator | None = None, spaces: list[ActionSpace] | None = None):
        self.stage = stage
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.spaces = spaces or stage_action_spaces(stage)
        self.x = greedy_matrix(stage) if initial is None else np.array(initial, dtype=np.int64)
        self.current = [sp.index_of(self.x[i, sp.columns]) for i, sp in enumerate(self.spaces)]
        self.served = (stage.alpha_matrix * self.x).sum(axis=0)
        # per-satellite capacity-weighted action rows; constant over the run
        self._alpha = [stage.alpha_matrix[i, sp.columns] for i, sp in enumerate(self.spaces)]
        self._work = [sp.matrix * a for sp, a in zip(self.spaces, self._alpha)]
        self._log_p: dict[float, float] = {}

    def log_p(self, eps: float) -> float:
        v = self._log_p.get(eps)
        if v is None:
            v = self._log_p[eps] = normalizer(self.stage, eps).log_value
        return v

    def objective(self) -> float:
        return float((self.stage.beta_vector - self.served).max())

    def potential(self, eps: float) -> float:
        h = logsumexp_smooth(self.stage.beta_vector - self.served, eps)
        return potential_from_h(h, eps, self.log_p(eps))

    def _values(self, i: int, work: np.ndarray, eps: float, remaining: np.ndarray) -> np.ndarray:
        cols = self.spaces[i].columns
        own = self._work[i][self.current[i]]
        weights = np.exp((remaining[cols] + own) / eps - self.log_p(eps))
        return -np.expm1(work * (-1.0 / eps)) @ weights

    def utilities(self, i: int, rows: np.ndarray, eps: float) -> np.ndarray:
        sp = self.spaces[i]
        alpha_i = self._alpha[i]
        others = (self.stage.beta_vector - self.served)[sp.columns] + alpha_i * self.x[i, sp.columns]
        return local_utility_rows(alpha_i, others, rows, eps, self.log_p(eps))

    def has_better_reply(self, i: int, eps: float) -> bool:
        values = self._values(i, self._work[i], eps, self.stage.beta_vector - self.served)
        return bool(strictly_better(values, values[self.current[i]]).any())

    def is_nash(self, eps: float) -> bool:
        return not any(self.has_better_reply(i, eps) for i in range(self.stage.n))

    def set_action(self, i: int, k: int) -> None:
        sp = self.spaces[i]
        self.served[sp.columns] += self._work[i][k] - self._work[i][self.current[i]]
        self.x[i, sp.columns] = sp.matrix[k]
        self.current[i] = k

    def step(self, t: int) -> StepRecord:
        cfg, n = self.config, self.stage.n
        i = (t - 1) % n
        eps, omega = cfg.epsilon(t), cfg.omega(t)
        size = len(self.spaces[i])
        idx = sample_indices(size, omega, self.rng, self.current[i])
        full = len(idx) == size
        work = self._work[i] if full else self._work[i][idx]
        remaining = self.stage.beta_vector - self.served
        values = self._values(i, work, eps, remaining)
        inc = values[self.current[i] if full else 0]
        better = np.flatnonzero(values - inc > TIE_RTOL * np.maximum(np.abs(values), abs(inc)))
        accepted = False
        if better.size:
            if cfg.variant is Variant.BRA:
                trial = better[int(np.argmax(values[better]))]
            else:
                trial = better[int(self.rng.integers(better.size))]
            theta = cfg.inertia
            if theta == 0 or self.rng.random() < 1 - theta:
                self.set_action(i, int(idx[trial]))
                remaining = self.stage.beta_vector - self.served
                accepted = True
        top = float(remaining.max())
        h = top + eps * math.log(float(np.exp((remaining - top) / eps).sum()))
        return StepRecord(t, self.stage.satellites[i], eps, omega, len(idx), int(better.size),
                          accepted, top, potential_from_h(h, eps, self.log_p(eps)))

    def allocation(self) -> AllocationFile:
        return AllocationFile.from_matrix(self.stage, self.x)


def setvbrp_step(stage: StageState, a: AllocationFile, t: int, config: LearnerConfig,
                 rng: np.random.Generator) -> tuple[AllocationFile, StepRecord]:
    """One relay step: satellite ``((t - 1) mod n) + 1`` revises its action."""
    check_feasible(stage, a)
    learner = Learner(stage, config, a.to_matrix(stage), rng)
    rec = learner.step(t)
    return learner.allocation(), rec


def run_learner(stage: StageState, config: LearnerConfig, initial: AllocationFile | None = None,
                rng: np.random.Generator | None = None) -> tuple[AllocationFile, IterationTrace]:
    """Run up to ``t_max`` relay iterations from the greedy (or given) start.

    With ``config.early_stop`` the run ends once the temperature has reached
    its floor and a full round of satellites is certified to have no better
    reply in their complete action spaces; the returned profile is the same
    as running on.
    """
    problems = validate_schedules(config.schedules, warn=False)
    if problems:
        raise InputError("invalid schedules: " + "; ".join(problems))
    if initial is not None:
        check_feasible(stage, initial)
    if stage.is_idle:
        final = initial or AllocationFile.null(stage)
        trace = IterationTrace(initial_objective=float(stage.beta_vector.max()), final=final)
        return final, trace
    learner = Learner(stage, config, None if initial is None else initial.to_matrix(stage), rng)
    t_f = config.floor_iteration()
    trace = IterationTrace(initial_objective=learner.objective(), floor_iteration=t_f)
    idle = 0
    for t in range(1, config.schedules.t_max + 1):
        rec = learner.step(t)
        trace.append(rec)
        if not config.early_stop or t <= t_f:
            continue
        idle = 0 if rec.accepted else idle + 1
        if idle >= stage.n:
            if learner.is_nash(rec.epsilon):
                trace.stopped_early = t < config.schedules.t_max
                break
            idle = 0
    trace.final = learner.allocation()
    return trace.final, trace
