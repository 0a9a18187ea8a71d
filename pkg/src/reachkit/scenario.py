"""Scenario files: the world description consumed by the mission loop.

JSON schema (scenario_version 1), documented in docs/scenario_schema.md:
domain bounds, safe-set anchors, obstacles (known/unknown), goals, robot
start, sensing radius, dynamics bounds, horizon, certification margin,
planner/control/adversary/surrogate configuration, and the master seed.
"""

import json
from dataclasses import asdict, dataclass, field

from .dynamics import Bounds, State
from .levelset import Disk

SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    """Structured validation failure; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("scenario validation failed:\n  - "
                         + "\n  - ".join(self.violations))


@dataclass
class ObstacleSpec:
    center: tuple
    radius: float
    known: bool = False

    def disk(self) -> Disk:
        return Disk(center=(float(self.center[0]), float(self.center[1])),
                    radius=float(self.radius))


@dataclass
class SafeSetSpec:
    center: tuple
    radius: float = 1.0
    half_width: float = 10.0


@dataclass
class Scenario:
    domain: tuple = ((-25.0, 25.0), (-25.0, 25.0))
    safe_sets: list = field(default_factory=list)
    obstacles: list = field(default_factory=list)
    goals: list = field(default_factory=list)
    start: tuple = (0.0, 0.0, 0.0)
    r_sense: float = 5.5
    bounds: Bounds = field(default_factory=Bounds)
    horizon: float = 8.0
    dt_out: float = 0.25
    epsilon: float = 0.3
    grid_dims: tuple = (50, 50, 25)
    constrain_feasible: bool = True
    planner: dict = field(default_factory=dict)
    control: dict = field(default_factory=dict)
    adversary: dict = field(default_factory=dict)
    surrogate: dict = field(default_factory=dict)
    seed: int = 0

    PLANNER_DEFAULTS = {"delta": 1.0, "n_init": 2000, "gamma": None,
                        "margin": 0.25, "grow_per_step": 2,
                        "dwell_nodes": 500, "gauss_std_factor": 3.0,
                        "feas_margin": 0.05}
    CONTROL_DEFAULTS = {"dt": 0.05, "k_theta": 2.0, "goal_tol": 0.3,
                        "t_floor": 4.0, "max_time": 600.0}
    ADVERSARY_DEFAULTS = {"prob": 0.0, "times": []}
    SURROGATE_DEFAULTS = {"kind": "oracle", "eps_inj": 0.3, "noise_seed": 0}

    def planner_cfg(self):
        return {**self.PLANNER_DEFAULTS, **self.planner}

    def control_cfg(self):
        return {**self.CONTROL_DEFAULTS, **self.control}

    def adversary_cfg(self):
        return {**self.ADVERSARY_DEFAULTS, **self.adversary}

    def surrogate_cfg(self):
        return {**self.SURROGATE_DEFAULTS, **self.surrogate}

    def start_state(self) -> State:
        return State(*map(float, self.start))

    def to_json(self, path=None):
        blob = {
            "scenario_version": SCENARIO_VERSION,
            "domain": [list(self.domain[0]), list(self.domain[1])],
            "safe_sets": [{"center": list(s.center), "radius": s.radius,
                           "half_width": s.half_width} for s in self.safe_sets],
            "obstacles": [{"center": list(o.center), "radius": o.radius,
                           "known": o.known} for o in self.obstacles],
            "goals": [list(g) for g in self.goals],
            "start": list(self.start),
            "r_sense": self.r_sense,
            "bounds": asdict(self.bounds),
            "horizon": self.horizon,
            "dt_out": self.dt_out,
            "epsilon": self.epsilon,
            "grid_dims": list(self.grid_dims),
            "constrain_feasible": self.constrain_feasible,
            "planner": self.planner,
            "control": self.control,
            "adversary": self.adversary,
            "surrogate": self.surrogate,
            "seed": self.seed,
        }
        text = json.dumps(blob, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as f:
                f.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, source):
        if isinstance(source, dict):
            blob = source
        elif hasattr(source, "read_text"):
            blob = json.loads(source.read_text())
        elif isinstance(source, (str, bytes)) and "{" not in str(source):
            with open(source) as f:
                blob = json.load(f)
        else:
            blob = json.loads(source)
        version = blob.get("scenario_version")
        if version != SCENARIO_VERSION:
            raise ScenarioError([f"unsupported scenario_version {version!r}"])
        try:
            return cls(
                domain=(tuple(blob["domain"][0]), tuple(blob["domain"][1])),
                safe_sets=[SafeSetSpec(center=tuple(s["center"]),
                                       radius=float(s.get("radius", 1.0)),
                                       half_width=float(s.get("half_width", 10.0)))
                           for s in blob["safe_sets"]],
                obstacles=[ObstacleSpec(center=tuple(o["center"]),
                                        radius=float(o["radius"]),
                                        known=bool(o.get("known", False)))
                           for o in blob.get("obstacles", [])],
                goals=[tuple(g) for g in blob["goals"]],
                start=tuple(blob["start"]),
                r_sense=float(blob.get("r_sense", 5.5)),
                bounds=Bounds(**blob.get("bounds", {})),
                horizon=float(blob.get("horizon", 8.0)),
                dt_out=float(blob.get("dt_out", 0.25)),
                epsilon=float(blob.get("epsilon", 0.3)),
                grid_dims=tuple(blob.get("grid_dims", (50, 50, 25))),
                constrain_feasible=bool(blob.get("constrain_feasible", True)),
                planner=dict(blob.get("planner", {})),
                control=dict(blob.get("control", {})),
                adversary=dict(blob.get("adversary", {})),
                surrogate=dict(blob.get("surrogate", {})),
                seed=int(blob.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise ScenarioError([f"malformed scenario field: {exc}"]) from exc
