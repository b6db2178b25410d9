import warnings

import numpy as np
import pytest

from conftest import random_stage
from gridalloc.actions import greedy_init
from gridalloc.learning import (
    LearnerConfig,
    ScheduleParams,
    ScheduleWarning,
    Variant,
    epsilon_schedule,
    omega_schedule,
    run_learner,
    setvbrp_step,
    validate_schedules,
)
from gridalloc.model import Action, AllocationFile, StageState
from gridalloc.oracle import is_nash_equilibrium

DEFAULTS = ScheduleParams()


def test_epsilon_schedule_examples():
    assert epsilon_schedule(100, DEFAULTS) == 15.4
    assert epsilon_schedule(250, DEFAULTS) == 15.4
    assert epsilon_schedule(450, DEFAULTS) == max(15.4 - 20, 1.0)
    assert epsilon_schedule(300, DEFAULTS) == pytest.approx(10.4)


def test_omega_schedule_examples():
    assert omega_schedule(100, DEFAULTS) == 0.5
    assert omega_schedule(1, DEFAULTS) == 0.06
    assert omega_schedule(200, DEFAULTS) == 1.0
    values = [omega_schedule(t, DEFAULTS) for t in range(1, 501)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_validate_schedules():
    assert validate_schedules(DEFAULTS) == []
    assert validate_schedules(ScheduleParams(eps_lower=20.0))
    with pytest.warns(ScheduleWarning):
        assert validate_schedules(ScheduleParams(phi_ratio=0.0)) == []


def test_floor_iteration():
    assert LearnerConfig().floor_iteration() == 394
    assert LearnerConfig(variant="brp").floor_iteration() == 1
    # decay never reaches eps_L: the floor is the last (smallest) value
    assert LearnerConfig(schedules=ScheduleParams(tau=0.95)).floor_iteration() == 500


def test_config_rejects_bad_inertia():
    with pytest.raises(ValueError):
        LearnerConfig(theta=1.0)


def test_variant_switches():
    assert LearnerConfig(variant=Variant.BRP).epsilon(450) == 15.4
    assert LearnerConfig(variant=Variant.TVBRP).omega(1) == 1.0
    assert LearnerConfig(variant=Variant.BRA, theta=0.5).inertia == 0.0


def test_tmax_zero_returns_greedy(rng):
    st = random_stage(rng, n=3, m=3, length=6)
    final, trace = run_learner(st, LearnerConfig(schedules=ScheduleParams(t_max=0)))
    assert final == greedy_init(st) and len(trace) == 0


def test_single_player_reaches_max_allocation():
    st = StageState.build(["s1"], ["g1"], {("s1", "g1"): 2}, {"g1": 30}, 10, 1)
    final, _ = run_learner(st, LearnerConfig(seed=4))
    assert final["s1"] == Action.from_dict("s1", {"g1": 9})


def test_empty_better_set_keeps_action():
    st = StageState.build(["s1"], ["g1"], {("s1", "g1"): 2}, {"g1": 30}, 10, 1)
    top = AllocationFile((Action.from_dict("s1", {"g1": 9}),))
    after, rec = setvbrp_step(st, top, 1, LearnerConfig(theta=0.0), np.random.default_rng(0))
    assert after == top and rec.n_better == 0 and not rec.accepted


def test_zero_inertia_single_better_reply_is_accepted():
    st = StageState.build(["s1"], ["g1"], {("s1", "g1"): 2}, {"g1": 30}, 3, 1)
    start = AllocationFile((Action.from_dict("s1", {"g1": 1}),))
    cfg = LearnerConfig(variant="brp", theta=0.0)
    for seed in range(20):
        after, rec = setvbrp_step(st, start, 1, cfg, np.random.default_rng(seed))
        assert rec.n_better == 1 and rec.accepted
        assert after["s1"] == Action.from_dict("s1", {"g1": 2})


def test_accepted_steps_raise_potential(rng):
    for k in range(5):
        st = random_stage(rng)
        _, trace = run_learner(st, LearnerConfig(seed=k, early_stop=False))
        for t in range(1, len(trace)):
            if trace.accepted[t] and trace.epsilon[t] == trace.epsilon[t - 1]:
                assert trace.potential[t] > trace.potential[t - 1]


def test_fixed_seed_is_reproducible(rng):
    st = random_stage(rng, n=3, m=3, length=6)
    _, a = run_learner(st, LearnerConfig(seed=9))
    _, b = run_learner(st, LearnerConfig(seed=9))
    assert a.objective == b.objective and a.potential == b.potential and a.actor == b.actor


def test_relay_order(rng):
    st = random_stage(rng, n=3, m=3, length=6)
    _, trace = run_learner(st, LearnerConfig(early_stop=False, schedules=ScheduleParams(t_max=7)))
    assert trace.actor == ["s1", "s2", "s3", "s1", "s2", "s3", "s1"]


def test_early_stop_lands_on_nash(rng):
    for k in range(5):
        st = random_stage(rng)
        final, trace = run_learner(st, LearnerConfig(seed=k))
        assert is_nash_equilibrium(st, final, trace.epsilon[-1])


def test_early_stop_matches_full_run(rng):
    st = random_stage(rng)
    stopped, t1 = run_learner(st, LearnerConfig(seed=2))
    full, t2 = run_learner(st, LearnerConfig(seed=2, early_stop=False))
    assert t1.stopped_early
    assert stopped == full
    assert t1.objective == t2.objective[: len(t1)]


def test_idle_stage_returns_null():
    st = StageState.build(["s1"], ["g1"], {}, {"g1": 4}, 10, 1)
    final, trace = run_learner(st, LearnerConfig())
    assert final == AllocationFile.null(st) and trace.initial_objective == 4


def test_initial_allocation_must_be_feasible():
    st = StageState.build(["s1"], ["g1"], {("s1", "g1"): 1}, {"g1": 4}, 3, 1)
    with pytest.raises(ValueError):
        run_learner(st, LearnerConfig(), initial=AllocationFile((Action.from_dict("s1", {"g1": 3}),)))


def test_no_schedule_warning_by_default():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        validate_schedules(DEFAULTS)
