import numpy as np
import pytest

from gridalloc.errors import InputError
from gridalloc.model import (
    Action,
    AllocationFile,
    Scenario,
    StageState,
    TimeWindow,
    check_feasible,
    imaging_transition_time,
    is_feasible,
    is_feasible_action,
    objective,
    payload_transfer_time,
    remaining_load,
    visible_grids,
)
from gridalloc.oracle import brute_force_optimum


def test_window_covering_rule():
    assert visible_grids([TimeWindow("s1", "g1", 0, 20)], 5, 10) == {"s1": {"g1"}}
    assert visible_grids([TimeWindow("s1", "g1", 0, 8)], 5, 10) == {}
    wins = [TimeWindow("s1", "g1", 0, 30), TimeWindow("s1", "g2", 12, 30)]
    assert visible_grids(wins, 0, 10) == {"s1": {"g1"}}


def test_window_must_be_nonempty():
    with pytest.raises(InputError):
        TimeWindow("s1", "g1", 5, 5)


def _stage(alpha, beta, length=10, C=1, eta=None):
    sats = sorted({s for s, _ in alpha})
    grids = sorted(beta)
    return StageState.build(sats, grids, alpha, beta, length, C, eta=eta)


def test_remaining_load_cases():
    st = _stage({("s1", "g1"): 2}, {"g1": 5})
    a = AllocationFile((Action.from_dict("s1", {"g1": 1}),))
    assert remaining_load(st, a, "g1") == 3
    assert remaining_load(st, AllocationFile.null(st), "g1") == 5
    st = _stage({("s1", "g1"): 2, ("s2", "g1"): 3}, {"g1": 6})
    a = AllocationFile((Action.from_dict("s1", {"g1": 2}), Action.from_dict("s2", {"g1": 1})))
    assert remaining_load(st, a, "g1") == -1


def test_transition_times():
    assert imaging_transition_time(Action.null("s1"), 1) == 0
    assert imaging_transition_time(Action.from_dict("s1", {"g1": 1, "g2": 1}), 1) == 2
    assert imaging_transition_time(Action.from_dict("s1", {"g1": 1, "g2": 1, "g3": 1}), 2) == 6
    assert payload_transfer_time({"g1", "g2"}, {"g3"}, 2) == 2
    assert payload_transfer_time({"g1"}, {"g1", "g4"}, 2) == 0
    assert payload_transfer_time(set(), {"g1"}, 2) == 0


def test_feasibility_boundaries():
    st = _stage({("s1", "g1"): 1, ("s1", "g2"): 1}, {"g1": 1, "g2": 1})
    assert is_feasible_action(st, Action.from_dict("s1", {"g1": 9}))
    assert not is_feasible_action(st, Action.from_dict("s1", {"g1": 10}))
    assert not is_feasible_action(st, Action.from_dict("s1", {"g1": 5, "g2": 5}))
    st2 = st.with_eta({"s1": 2})
    assert is_feasible_action(st2, Action.from_dict("s1", {"g1": 7}))
    assert not is_feasible_action(st2, Action.from_dict("s1", {"g1": 8}))


def test_eta_boundary_found_by_enumeration():
    st = _stage({("s1", "g1"): 1}, {"g1": 1}).with_eta({"s1": 2})
    ok = [x for x in range(1, 11) if is_feasible_action(st, Action.from_dict("s1", {"g1": x}))]
    assert max(ok) == 7


def test_invisible_grid_is_infeasible():
    st = _stage({("s1", "g1"): 1}, {"g1": 1, "g2": 1})
    a = AllocationFile((Action.from_dict("s1", {"g2": 1}),))
    assert not is_feasible(st, a)
    with pytest.raises(InputError):
        check_feasible(st, a)


def test_objective_examples():
    st = _stage({("s1", "g1"): 1, ("s1", "g2"): 1}, {"g1": 3, "g2": 7})
    assert objective(st, AllocationFile.null(st)) == 7
    st = _stage({("s1", "g1"): 2, ("s2", "g2"): 2}, {"g1": 4, "g2": 4})
    a = AllocationFile((Action.from_dict("s1", {"g1": 2}), Action.from_dict("s2", {"g2": 2})))
    assert objective(st, a) == 0


def test_objective_two_by_two_oracle(two_by_two):
    # exhaustive value; total capacity 2 * 2 * 10 = 40 < 46 rules out anything below 18
    report = brute_force_optimum(two_by_two)
    assert report.optimum == 18
    assert report.joint_size == 47 ** 2
    best = report.profiles[0]
    assert objective(two_by_two, best) == 18


def test_action_is_canonical():
    a = Action.from_dict("s1", {"g2": 3, "g1": 1, "g3": 0})
    assert a.allocation == (("g1", 1), ("g2", 3))
    assert a.total == 4 and a.grids == {"g1", "g2"}
    with pytest.raises(InputError):
        Action.from_dict("s1", {"g1": -1})


def test_matrix_round_trip(two_by_two):
    x = np.array([[2, 0], [1, 3]])
    a = AllocationFile.from_matrix(two_by_two, x)
    assert np.array_equal(a.to_matrix(two_by_two), x)
    assert a.satellites_on("g1") == {"s1", "s2"}


def test_scenario_table_inheritance():
    sc = Scenario(("s1",), ("g1",), (TimeWindow("s1", "g1", 0, 30),), {("s1", "g1", 0): 2},
                  {("g1", 0): 10, ("g1", 2): 20}, transfer_penalty=2, transition_constant=1,
                  stage_length=10, horizon=(0, 30), capacity_default=3)
    assert sc.alpha("s1", "g1", 1) == 2
    assert sc.beta("g1", 1) == 10
    assert sc.beta("g1", 2) == 20


def test_stage_rejects_bad_alpha():
    with pytest.raises(InputError):
        _stage({("s1", "g1"): 0}, {"g1": 1})
