"""Smoothed objective, global utility, normalizer, local utilities and potential.

The global utility ``U = -sum_j exp(y_j / eps)`` overflows a double once
``y_j / eps`` passes ~709, so everything the learner touches (local utility,
potential) is evaluated in the log domain against the normalizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStageError, InputError
from .model import AllocationFile, StageState, check_feasible, remaining_loads

# Strict-improvement threshold, relative to the magnitude of the compared values.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SmoothingParams:
    epsilon: float

    def __post_init__(self):
        _check_eps(self.epsilon)


@dataclass(frozen=True)
class Normalizer:
    value: float
    log_value: float
    alpha_max: float
    beta_max: float
    n_max: int
    budget: int


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise InputError(f"smoothing temperature must be > 0, got {eps}")


def _log1mexp_neg(z):
    """log(1 - exp(-z)) for z > 0."""
    z = np.asarray(z, dtype=float)
    return np.where(z > math.log(2), np.log1p(-np.exp(-z)), np.log(-np.expm1(-z)))


def logsumexp_smooth(y: np.ndarray, eps: float) -> float:
    """``eps * log(sum(exp(y / eps)))`` with a max shift."""
    _check_eps(eps)
    y = np.asarray(y, dtype=float)
    top = y.max()
    return float(top + eps * math.log(np.exp((y - top) / eps).sum()))


def smooth_objective(stage: StageState, a: AllocationFile, eps: float) -> float:
    _check_eps(eps)
    check_feasible(stage, a)
    return logsumexp_smooth(remaining_loads(stage, a.to_matrix(stage)), eps)


def global_utility(stage: StageState, a: AllocationFile, eps: float) -> float:
    """``U(a) = -exp(h(a) / eps)``; always negative (``-inf`` past double range)."""
    h = smooth_objective(stage, a, eps)
    with np.errstate(over="ignore"):
        return -float(np.exp(h / eps))


def max_support_size(stage: StageState) -> int:
    """Largest number of grids any satellite can feasibly allocate at once."""
    counts = stage.visibility.sum(axis=1)
    per_grid = 1 + stage.transition_constant
    budgets = stage.length - stage.eta_vector
    return int(np.minimum(budgets // per_grid, counts).max(initial=0))


def normalizer(stage: StageState, eps: float) -> Normalizer:
    """Upper bound on any satellite's marginal contribution.

    ``N_max`` comes from the feasibility bound rather than a particular action
    file, so the value is a constant of the game. A stage where nobody can
    afford a single grid still gets ``N_max = 1`` to keep the value positive.
    """
    _check_eps(eps)
    if stage.is_idle:
        raise DegenerateStageError("stage has no visible satellite/grid pair")
    alpha_max = float(stage.alpha_matrix.max())
    beta_max = float(stage.beta_vector.max())
    n_max = max_support_size(stage)
    budget = stage.length
    log_p = (math.log(max(n_max, 1)) + float(_log1mexp_neg(budget * alpha_max / eps))
             + beta_max / eps)
    with np.errstate(over="ignore"):
        value = float(np.exp(log_p))
    return Normalizer(value, log_p, alpha_max, beta_max, n_max, budget)


def _others_remaining(stage: StageState, x: np.ndarray, i: int) -> np.ndarray:
    """Remaining loads with satellite ``i`` nulled."""
    served = (stage.alpha_matrix * x).sum(axis=0) - stage.alpha_matrix[i] * x[i]
    return stage.beta_vector - served


def marginal_contribution(stage: StageState, a: AllocationFile, satellite, eps: float) -> float:
    """``U(a_i, a_-i) - U(null_i, a_-i)``, summed over the grids ``a_i`` serves."""
    _check_eps(eps)
    check_feasible(stage, a)
    x = a.to_matrix(stage)
    i = stage.sat_index(satellite)
    r = _others_remaining(stage, x, i)
    total = 0.0
    for j in np.flatnonzero(x[i]):
        gain = -math.expm1(-x[i, j] * stage.alpha_matrix[i, j] / eps)
        total += gain * math.exp(r[j] / eps)
    return total


def local_utility_rows(alpha_i: np.ndarray, others_remaining: np.ndarray, rows: np.ndarray,
                       eps: float, log_p: float) -> np.ndarray:
    """Normalized marginal contribution for each candidate allocation row.

    ``rows`` has one column per entry of ``alpha_i``/``others_remaining``; zero
    entries contribute nothing.
    """
    weights = np.exp(others_remaining / eps - log_p)
    with np.errstate(divide="ignore"):
        gains = -np.expm1(-(rows * alpha_i) / eps)
    return gains @ weights


def local_utility(stage: StageState, a: AllocationFile, satellite, eps: float,
                  norm: Normalizer | None = None) -> float:
    _check_eps(eps)
    check_feasible(stage, a)
    norm = norm or normalizer(stage, eps)
    x = a.to_matrix(stage)
    i = stage.sat_index(satellite)
    r = _others_remaining(stage, x, i)
    cols = np.flatnonzero(x[i])
    if cols.size == 0:
        return 0.0
    logs = (_log1mexp_neg(x[i, cols] * stage.alpha_matrix[i, cols] / eps)
            + r[cols] / eps - norm.log_value)
    return float(np.exp(logs).sum())


def potential(stage: StageState, a: AllocationFile, eps: float,
              norm: Normalizer | None = None) -> float:
    """``phi(a) = U(a) / P``; maximizing it maximizes the global utility."""
    norm = norm or normalizer(stage, eps)
    h = smooth_objective(stage, a, eps)
    return potential_from_h(h, eps, norm.log_value)


def potential_from_h(h: float, eps: float, log_p: float) -> float:
    with np.errstate(over="ignore"):
        return -float(np.exp(h / eps - log_p))


def strictly_better(candidate, incumbent):
    """``candidate > incumbent`` beyond floating-point ties; vectorized over ``candidate``."""
    candidate = np.asarray(candidate, dtype=float)
    scale = np.maximum(np.abs(candidate), abs(float(incumbent)))
    return candidate - incumbent > TIE_RTOL * scale
