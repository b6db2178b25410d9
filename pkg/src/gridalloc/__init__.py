"""Potential-game allocation of satellite observation time to ground grids."""

from .actions import ActionSpace, enumerate_actions, greedy_init, stage_action_spaces
from .errors import CapacityError, DegenerateStageError, InputError
from .learning import LearnerConfig, ScheduleParams, Variant, run_learner, setvbrp_step
from .model import Action, AllocationFile, Scenario, StageState, TimeWindow, objective
from .multistage import run_dgap, segment_timeline
from .scenario_io import generate_scenario, load_scenario, preset_spec, save_scenario

__version__ = "0.1.0"

__all__ = [
    "Action", "ActionSpace", "AllocationFile", "CapacityError", "DegenerateStageError", "InputError",
    "LearnerConfig", "Scenario", "ScheduleParams", "StageState", "TimeWindow", "Variant",
    "enumerate_actions", "generate_scenario", "greedy_init", "load_scenario", "objective",
    "preset_spec", "run_dgap", "run_learner", "save_scenario", "segment_timeline", "setvbrp_step",
    "stage_action_spaces",
]
