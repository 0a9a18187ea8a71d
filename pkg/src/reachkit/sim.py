"""Deterministic mission simulator.

Runs the full contingency-aware multi-goal loop: per-goal incremental
planners confined to the certified feasible region, exact tour routing,
pure-pursuit tracking, disk sensing, reactive anchor/planner updates on
obstacle discovery, and certified recovery runs on adversary triggers
(or when every remaining goal's tree loses the robot).

Anchors share one local-frame solver cache keyed by the translated
obstacle configuration, so the obstacle-free field is solved once and
reused across anchors via translation.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .contingency import LocalWorld, execute_contingency
from .dynamics import Bounds, Control, Disturbance, State, rk4_step
from .grid import Grid3, wrap_angle
from .levelset import Disk, sdf_obstacles, sdf_target, solve_hji_vi
from .planner import PlanGraph, SamplerConfig
from .reachsets import FeasibleRegion, OutOfLocalFrame, SafeSetAnchor, \
    overlap_check, translate_query
from .router import NoFeasibleTour, extract_costs, replan_tour
from .scenario import Scenario, ScenarioError
from .surrogate import PerturbedOracle

TRACE_COLUMNS = ["t", "x", "y", "theta", "v", "omega", "dx", "dy", "dtheta",
                 "V", "branch", "g"]


class LocalSolver:
    """Shared local-frame oracle solver with per-configuration caching."""

    def __init__(self, scenario: Scenario):
        self.grid = Grid3(dims=tuple(scenario.grid_dims))
        self.bounds = scenario.bounds
        self.horizon = scenario.horizon
        self.dt_out = scenario.dt_out
        self.radius = scenario.safe_sets[0].radius if scenario.safe_sets else 1.0
        self._ell = sdf_target(self.grid, self.radius)
        self._cache = {}
        self._order = []
        self.cache_limit = 12  # obstacle-free entry is pinned
        self.solve_count = 0

    def __call__(self, obstacles):
        key = tuple(sorted((round(o.center[0], 9), round(o.center[1], 9),
                            round(o.radius, 9)) for o in obstacles))
        if key not in self._cache:
            g = sdf_obstacles(self.grid, list(obstacles))
            self._cache[key] = solve_hji_vi(self.grid, self._ell, g,
                                            self.bounds, self.horizon,
                                            self.dt_out)
            self.solve_count += 1
            if key != ():
                self._order.append(key)
                while len(self._order) > self.cache_limit:
                    self._cache.pop(self._order.pop(0), None)
        return self._cache[key]


def make_backend(scenario: Scenario, solver: LocalSolver):
    cfg = scenario.surrogate_cfg()
    kind = cfg.get("kind", "oracle")
    if kind == "oracle":
        return PerturbedOracle(solver=solver, eps_inj=0.0,
                               seed=int(cfg.get("noise_seed", 0)),
                               name="oracle")
    if kind == "perturbed":
        return PerturbedOracle(solver=solver,
                               eps_inj=float(cfg.get("eps_inj", 0.3)),
                               seed=int(cfg.get("noise_seed", 0)))
    if kind == "fno":
        from .fno import load_weights
        from .surrogate import TrainedOperator
        vf_times = scenario.dt_out * np.arange(
            int(round(scenario.horizon / scenario.dt_out)) + 1)
        return TrainedOperator(weights=load_weights(cfg["weights"]),
                               grid=solver.grid, times=vf_times)
    raise ScenarioError([f"unknown surrogate kind {kind!r}"])


class AnchorRuntime:
    """One safe set: its global anchor, backend, and current value field."""

    def __init__(self, spec, backend, solver: LocalSolver):
        self.anchor = SafeSetAnchor(center=tuple(spec.center),
                                    radius=spec.radius,
                                    half_width=spec.half_width,
                                    provider_id=f"anchor@{spec.center}")
        self.backend = backend
        self.solver = solver
        self.local_obstacles = []
        self.vf = backend.value_field([])

    def local_view(self, disks):
        """Obstacles intersecting this anchor's local domain, local frame."""
        cx, cy = self.anchor.center
        w = self.anchor.half_width
        out = []
        for d in disks:
            lx, ly = d.center[0] - cx, d.center[1] - cy
            # disk vs local square intersection
            qx = min(max(lx, -w), w)
            qy = min(max(ly, -w), w)
            if np.hypot(lx - qx, ly - qy) <= d.radius:
                out.append(Disk(center=(lx, ly), radius=d.radius))
        return out

    def affected_by(self, new_disks):
        return len(self.local_view(new_disks)) > 0

    def update(self, known_disks):
        local = self.local_view(known_disks)
        if local != self.local_obstacles:
            self.local_obstacles = local
            self.vf = self.backend.value_field(local)

    def value_at(self, s: State, t: float):
        try:
            return translate_query((s.x, s.y), s.theta, t, self.anchor, self.vf)
        except OutOfLocalFrame:
            return math.inf


@dataclass
class MissionMetrics:
    success: bool
    distance: float
    wall_time: float
    sim_time: float
    goals_visited: int
    arrival_times: list
    contingency_activations: int
    replan_count: int
    collision: bool
    solve_count: int
    unreachable_goals: list
    feasibility_violations: int = 0
    tours: list = None

    def to_dict(self):
        out = dict(self.__dict__)
        out["arrival_times"] = [[int(g), float(t)] for g, t in self.arrival_times]
        out["tours"] = self.tours or []
        return out


def validate(scenario: Scenario, runtimes=None, solver=None):
    """Safe-set separation, overlap-chain, and start-feasibility checks.

    Returns the violation list (empty when the scenario is well-posed).
    Passing prebuilt anchor runtimes avoids re-solving the local fields.
    """
    violations = []
    if not scenario.safe_sets:
        violations.append("no safe sets defined")
        return violations
    for j, obs in enumerate(scenario.obstacles):
        for i, safe in enumerate(scenario.safe_sets):
            dist = math.hypot(obs.center[0] - safe.center[0],
                              obs.center[1] - safe.center[1])
            if dist <= obs.radius + safe.radius:
                violations.append(
                    f"separation violation: obstacle {j} at {tuple(obs.center)} "
                    f"(r={obs.radius}) intersects safe set {i} at "
                    f"{tuple(safe.center)} (r={safe.radius})")
    for k, goal in enumerate(scenario.goals):
        (x0, x1), (y0, y1) = scenario.domain
        if not (x0 <= goal[0] <= x1 and y0 <= goal[1] <= y1):
            violations.append(f"goal {k} at {tuple(goal)} outside the domain")

    if runtimes is None:
        solver = solver or LocalSolver(scenario)
        backend = make_backend(scenario, solver)
        runtimes = [AnchorRuntime(s, backend, solver)
                    for s in scenario.safe_sets]
        known = [o.disk() for o in scenario.obstacles if o.known]
        for rt in runtimes:
            rt.update(known)

    delta = scenario.planner_cfg()["delta"]
    region = FeasibleRegion.from_fields(
        [rt.anchor for rt in runtimes], [rt.vf for rt in runtimes],
        scenario.horizon, scenario.epsilon)
    masks = region.masks()

    # overlap chain: anchors whose local domains intersect must chain up
    # into one connected component via delta-ball witnesses
    n = len(runtimes)
    adjacency = [[False] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            ai, aj = runtimes[i].anchor, runtimes[j].anchor
            gap_x = abs(ai.center[0] - aj.center[0])
            gap_y = abs(ai.center[1] - aj.center[1])
            if gap_x > ai.half_width + aj.half_width or \
               gap_y > ai.half_width + aj.half_width:
                continue
            if overlap_check(masks[i], masks[j], delta) is not None:
                adjacency[i][j] = adjacency[j][i] = True
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in range(n):
            if adjacency[u][v] and v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != n:
        missing = sorted(set(range(n)) - seen)
        violations.append(
            f"overlap violation: safe sets {missing} have no delta-ball "
            f"overlap chain to safe set 0 (delta={delta})")

    sx, sy, _ = scenario.start
    if not region.contains(sx, sy):
        violations.append(
            f"start {tuple(scenario.start[:2])} outside the initial "
            f"feasible region (epsilon={scenario.epsilon})")
    return violations


def sense(world_obstacles, known_flags, robot_xy, r_sense):
    """Center-distance sensing (closed inequality); returns new indices."""
    new = []
    for i, obs in enumerate(world_obstacles):
        if known_flags[i]:
            continue
        if math.hypot(obs.center[0] - robot_xy[0],
                      obs.center[1] - robot_xy[1]) <= r_sense:
            known_flags[i] = True
            new.append(i)
    return new


def pure_pursuit(path_points, s: State, delta, k_theta, b: Bounds) -> Control:
    """Track the polyline: steer at a lookahead one step ahead on the path."""
    pts = path_points
    target = pts[-1]
    acc = 0.0
    prev = np.array([s.x, s.y])
    for p in pts:
        acc += float(np.hypot(*(p - prev)))
        prev = p
        if acc >= delta:
            target = p
            break
    err = float(wrap_angle(math.atan2(target[1] - s.y, target[0] - s.x)
                           - s.theta))
    omega = float(np.clip(k_theta * err, -b.omega_max, b.omega_max))
    v = b.v_max * max(0.0, 1.0 - abs(err) / math.pi)
    return Control(v=float(np.clip(v, b.v_min, b.v_max)), omega=omega)


class MissionRunner:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.solver = LocalSolver(scenario)
        self.backend = make_backend(scenario, self.solver)
        self.runtimes = [AnchorRuntime(spec, self.backend, self.solver)
                         for spec in scenario.safe_sets]
        self.world = [o.disk() for o in scenario.obstacles]
        self.known_flags = [bool(o.known) for o in scenario.obstacles]
        self.rng = np.random.default_rng(scenario.seed)
        self.trace = []
        self.replan_count = 0
        self.activations = 0

    # -- helpers -------------------------------------------------------------

    def known_disks(self):
        return [d for d, k in zip(self.world, self.known_flags) if k]

    def known_g(self, x, y):
        disks = self.known_disks()
        if not disks:
            return -float(np.hypot(self.sc.domain[0][1] - self.sc.domain[0][0],
                                   self.sc.domain[1][1] - self.sc.domain[1][0]))
        return float(max(d.signed_distance(x, y) for d in disks))

    def feasible_region(self):
        """Planning region, tightened by feas_margin so tracked trajectories
        never shave the scenario's certified epsilon-contour."""
        if not self.sc.constrain_feasible:
            return None
        margin = self.sc.planner_cfg()["feas_margin"]
        return FeasibleRegion.from_fields(
            [rt.anchor for rt in self.runtimes],
            [rt.vf for rt in self.runtimes],
            self.sc.horizon, self.sc.epsilon + margin)

    def min_anchor_value(self, s: State):
        vals = [rt.value_at(s, self.sc.horizon) for rt in self.runtimes]
        return min(vals), int(np.argmin(vals))

    def trace_row(self, t, s, u, d, branch):
        v_min, _ = self.min_anchor_value(s)
        self.trace.append([t, s.x, s.y, s.theta, u.v, u.omega,
                           d.dx, d.dy, d.dtheta,
                           v_min if math.isfinite(v_min) else float("nan"),
                           branch, self.known_g(s.x, s.y)])

    # -- mission -------------------------------------------------------------

    def run(self) -> tuple:
        sc = self.sc
        t_wall = time.perf_counter()
        known = self.known_disks()
        for rt in self.runtimes:
            rt.update(known)
        violations = validate(sc, runtimes=self.runtimes, solver=self.solver)
        if violations:
            raise ScenarioError(violations)

        pcfg = sc.planner_cfg()
        ccfg = sc.control_cfg()
        acfg = sc.adversary_cfg()
        dt = ccfg["dt"]
        feasible = self.feasible_region()
        sampler = SamplerConfig(gauss_std=pcfg["gauss_std_factor"]
                                * sc.safe_sets[0].radius)
        graphs = []
        for k, goal in enumerate(sc.goals):
            g = PlanGraph(goal=goal, domain=sc.domain, delta=pcfg["delta"],
                          gamma=pcfg["gamma"], seed=sc.seed * 1000 + k,
                          sampler=sampler, margin=pcfg["margin"],
                          anchors=[s.center for s in sc.safe_sets])
            g.grow(pcfg["n_init"], feasible=feasible,
                   obstacles=self.known_disks())
            graphs.append(g)

        s = sc.start_state()
        clock = 0.0
        visited = [False] * len(sc.goals)
        arrival_times = []
        unreachable = []
        pending_adversary = sorted(acfg["times"], reverse=True)

        def mark_visited_if_at_goal():
            for k, goal in enumerate(sc.goals):
                if not visited[k] and np.hypot(goal[0] - s.x,
                                               goal[1] - s.y) <= ccfg["goal_tol"]:
                    visited[k] = True
                    arrival_times.append((k, clock))

        mark_visited_if_at_goal()

        invalid = set()

        tour_log = []

        def compute_tour():
            self.replan_count += 1
            rem = [k for k in range(len(sc.goals)) if not visited[k]]
            if not rem:
                return []
            robot_costs = []
            for k in rem:
                path = graphs[k].best_path((s.x, s.y))
                robot_costs.append(path["cost"] if path else math.inf)
            goal_costs = extract_costs([sc.goals[k] for k in rem],
                                       [graphs[k] for k in rem])
            inv = {i for i, k in enumerate(rem) if k in invalid}
            try:
                tour = replan_tour(robot_costs, goal_costs, invalid=inv)
            except NoFeasibleTour:
                return None
            order = [rem[i - 1] for i in tour.order[1:]]
            entry = tour.to_dict()
            entry.update({"t": float(clock), "goal_order": order})
            tour_log.append(entry)
            return order

        def refresh_invalid():
            invalid.clear()
            for k in range(len(sc.goals)):
                if visited[k]:
                    continue
                if graphs[k].best_path((s.x, s.y)) is None:
                    invalid.add(k)

        refresh_invalid()
        order = compute_tour()
        collision = False
        success = False
        feas_violations = 0

        while clock < ccfg["max_time"]:
            if all(visited):
                success = True
                break
            rem = [k for k in range(len(sc.goals)) if not visited[k]]
            adversary_hit = False
            if pending_adversary and clock >= pending_adversary[-1] - 1e-9:
                pending_adversary.pop()
                adversary_hit = True
            elif acfg["prob"] > 0 and self.rng.random() < acfg["prob"]:
                adversary_hit = True

            all_invalid = order is None or (rem and all(k in invalid for k in rem))
            if adversary_hit or all_invalid:
                self.activations += 1
                outcome = self._contingency(s, clock, dt, ccfg)
                if outcome is None:
                    unreachable.extend(k for k in rem if k in invalid)
                    break
                merged, s, clock = outcome
                # recovery rows certify against the live learned field: the
                # recorded value must stay within the certification margin
                feas_violations += sum(
                    1 for row in merged.trace[:-1] if float(row[9]) > 0.0)
                if not merged.reached:
                    collision = merged.min_g_margin > 0.0
                    break
                # dwell: regrow whatever lost the robot, then resume
                self._discover(s)
                feasible = self.feasible_region()
                refresh_invalid()
                for k in sorted(invalid):
                    graphs[k].robot_bias_point = np.array([s.x, s.y])
                    graphs[k].grow(pcfg["dwell_nodes"], feasible=feasible,
                                   obstacles=self.known_disks(), invalid=True)
                    graphs[k].robot_bias_point = None
                refresh_invalid()
                order = compute_tour()
                mark_visited_if_at_goal()
                continue

            current = next((k for k in order if not visited[k]), None)
            if current is None:
                order = compute_tour()
                continue
            path = graphs[current].best_path((s.x, s.y))
            if path is None:
                invalid.add(current)
                order = compute_tour()
                continue

            u = pure_pursuit(path["points"], s, pcfg["delta"],
                             ccfg["k_theta"], sc.bounds)
            d = Disturbance()
            self.trace_row(clock, s, u, d, "nominal")
            s = rk4_step(s, u, d, dt)
            clock += dt
            # the sweep checks the scenario's own epsilon-region
            if feasible is not None and \
                    feasible.value(s.x, s.y) > -self.sc.epsilon:
                feas_violations += 1
            if self._true_g(s) > 0:
                collision = True
                break

            if graphs[current].n < 3 * pcfg["n_init"]:
                graphs[current].grow(pcfg["grow_per_step"], feasible=feasible,
                                     obstacles=self.known_disks())

            new_idx = sense(self.world, self.known_flags, (s.x, s.y),
                            sc.r_sense)
            if new_idx:
                new_disks = [self.world[i] for i in new_idx]
                for rt in self.runtimes:
                    if rt.affected_by(new_disks):
                        rt.update(self.known_disks())
                feasible = self.feasible_region()
                for k in rem:
                    for disk in new_disks:
                        graphs[k].insert_obstacle(disk)
                    if feasible is not None:
                        graphs[k].invalidate_infeasible(feasible)
                refresh_invalid()
                order = compute_tour()

            mark_visited_if_at_goal()

        mark_visited_if_at_goal()
        if all(visited):
            success = True
        final_u, final_d = Control(0.0, 0.0), Disturbance()
        self.trace_row(clock, s, final_u, final_d, "end")
        metrics = MissionMetrics(
            success=success,
            distance=trace_distance(self.trace),
            wall_time=time.perf_counter() - t_wall,
            sim_time=clock,
            goals_visited=int(sum(visited)),
            arrival_times=arrival_times,
            contingency_activations=self.activations,
            replan_count=self.replan_count,
            collision=collision,
            solve_count=self.solver.solve_count,
            unreachable_goals=sorted(set(unreachable)),
            feasibility_violations=feas_violations,
            tours=tour_log,
        )
        return metrics, self.trace

    def _true_g(self, s):
        if not self.world:
            return -math.inf
        return float(max(d.signed_distance(s.x, s.y) for d in self.world))

    def _discover(self, s):
        new_idx = sense(self.world, self.known_flags, (s.x, s.y),
                        self.sc.r_sense)
        if new_idx:
            disks = [self.world[i] for i in new_idx]
            for rt in self.runtimes:
                if rt.affected_by(disks):
                    rt.update(self.known_disks())

    def _contingency(self, s: State, clock, dt, ccfg):
        """Run the recovery policy toward the best anchor; returns
        (outcome, new_state, new_clock) or None if no anchor is feasible."""
        vals = [rt.value_at(s, self.sc.horizon) for rt in self.runtimes]
        best = int(np.argmin(vals))
        if not math.isfinite(vals[best]):
            return None
        rt = self.runtimes[best]
        cx, cy = rt.anchor.center
        local_world = LocalWorld(
            safe_radius=rt.anchor.radius,
            obstacles=rt.local_view(self.world),
            known=rt.local_view(self.known_disks()),
            r_sense=self.sc.r_sense)
        local_start = State(s.x - cx, s.y - cy, s.theta)
        t_floor = ccfg["t_floor"]
        try:
            outcome = execute_contingency(
                local_world, local_start, rt.backend, self.solver([]),
                self.sc.bounds, dt=dt, t_range=(t_floor, self.sc.horizon),
                epsilon=self.sc.epsilon, time_offset=clock)
        except ValueError:
            return None
        # fold newly sensed local obstacles back into the global known set
        for disk in local_world.known:
            gx, gy = disk.center[0] + cx, disk.center[1] + cy
            for i, w in enumerate(self.world):
                if not self.known_flags[i] and \
                        abs(w.center[0] - gx) < 1e-9 and \
                        abs(w.center[1] - gy) < 1e-9:
                    self.known_flags[i] = True
        for row in outcome.trace:
            self.trace.append([row[0], row[1] + cx, row[2] + cy, *row[3:]])
        end = outcome.trace[-1]
        new_state = State(end[1] + cx, end[2] + cy, end[3])
        rt.update(self.known_disks())
        return outcome, new_state, clock + outcome.t_reach


def trace_distance(trace):
    """Trapezoidal integral of planar speed over the trace."""
    if len(trace) < 2:
        return 0.0
    t = np.array([float(r[0]) for r in trace])
    th = np.array([float(r[3]) for r in trace])
    v = np.array([float(r[4]) for r in trace])
    dx = np.array([float(r[6]) for r in trace])
    dy = np.array([float(r[7]) for r in trace])
    speed = np.hypot(v * np.cos(th) + dx, v * np.sin(th) + dy)
    return float(np.trapezoid(speed, t))


def run_mission(scenario: Scenario):
    """Validate and execute the scenario; returns (metrics, trace rows)."""
    return MissionRunner(scenario).run()


def trace_to_csv(trace, path):
    with open(path, "w") as f:
        f.write(",".join(TRACE_COLUMNS) + "\n")
        for row in trace:
            cells = []
            for item in row:
                if isinstance(item, str):
                    cells.append(item)
                else:
                    cells.append(f"{float(item):.12g}")
            f.write(",".join(cells) + "\n")
