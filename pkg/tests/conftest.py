import numpy as np
import pytest

from gridalloc.actions import stage_action_spaces
from gridalloc.model import AllocationFile, StageState


def random_stage(rng, n=3, m=3, length=6, C=1, visibility=0.7, beta=(30, 80), alpha=(2, 3),
                 eta_max=0):
    """Random oracle-sized stage; every satellite sees at least one grid."""
    sats = [f"s{i + 1}" for i in range(n)]
    grids = [f"g{j + 1}" for j in range(m)]
    alpha_map = {}
    for i, s in enumerate(sats):
        seen = [j for j in range(m) if rng.random() < visibility] or [int(rng.integers(m))]
        for j in seen:
            alpha_map[(s, grids[j])] = int(rng.integers(alpha[0], alpha[1] + 1))
    beta_map = {g: int(rng.integers(beta[0], beta[1] + 1)) for g in grids}
    eta = {s: int(rng.integers(0, eta_max + 1)) for s in sats}
    return StageState.build(sats, grids, alpha_map, beta_map, length, C, eta=eta)


def random_profile(stage, rng) -> AllocationFile:
    spaces = stage_action_spaces(stage)
    return AllocationFile(tuple(sp.action(int(rng.integers(len(sp)))) for sp in spaces))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_by_two():
    """2 sats, 2 grids, beta=(30, 40), alpha all 2, dt=10, C=1."""
    alpha = {(s, g): 2 for s in ("s1", "s2") for g in ("g1", "g2")}
    return StageState.build(["s1", "s2"], ["g1", "g2"], alpha, {"g1": 30, "g2": 40}, 10, 1)


# criterion -> list of (part, passed, detail); printed once at the end of the session
_ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def acceptance():
    def record(criterion: int, part: str, passed: bool, detail: str) -> None:
        _ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[crit]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        body = "; ".join(f"{name}: {'pass' if ok else 'FAIL'} ({detail})" for name, ok, detail in parts)
        terminalreporter.write_line(f"criterion {crit}: {status} | {body}")
