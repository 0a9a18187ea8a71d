"""Certified reach-avoid planning toolkit."""

from .dynamics import Bounds, Control, Costate, Disturbance, State
from .grid import Grid3, ScalarField, ValueField, read_hjvf, write_hjvf
from .levelset import Disk, sdf_obstacles, sdf_target, solve_hji_vi
from .scenario import Scenario, ScenarioError
from .sim import run_mission

__version__ = "0.1.0"

__all__ = [
    "Bounds", "Control", "Costate", "Disturbance", "State",
    "Grid3", "ScalarField", "ValueField", "read_hjvf", "write_hjvf",
    "Disk", "sdf_obstacles", "sdf_target", "solve_hji_vi",
    "Scenario", "ScenarioError", "run_mission",
]
