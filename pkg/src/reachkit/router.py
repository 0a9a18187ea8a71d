"""Exact open-tour routing over goals via Held-Karp subset DP.

Costs come from the per-goal shortest-path trees: entry (i, j) is the
cost-to-goal of goal i's position read from goal j's tree. Infeasible
transitions are ``math.inf`` and the DP skips them outright rather than
doing arithmetic on them; a tour is reported only if some completion is
fully finite. Ties break toward the lexicographically smallest
permutation.
"""

import math
from dataclasses import dataclass

import numpy as np

HARD_CAP = 20  # 2^(K-1) DP states; beyond this the problem is mis-posed here


class NoFeasibleTour(RuntimeError):
    pass


@dataclass
class Tour:
    order: list       # visitation order, starting at the designated start
    cost: float
    leg_costs: list

    def to_dict(self):
        return {"order": [int(i) for i in self.order],
                "cost": float(self.cost),
                "leg_costs": [float(c) for c in self.leg_costs]}


def extract_costs(goals, graphs) -> np.ndarray:
    """c[i][j] = cost of goal i's position inside goal j's tree (inf if unreachable)."""
    if len(goals) != len(graphs):
        raise ValueError("one graph per goal required")
    k = len(goals)
    c = np.full((k, k), math.inf)
    for j, graph in enumerate(graphs):
        for i, goal in enumerate(goals):
            if i == j:
                c[i, j] = 0.0
                continue
            path = graph.best_path(goal)
            if path is not None:
                c[i, j] = path["cost"]
    return c


def held_karp(cost, start: int, invalid=frozenset()) -> Tour:
    """Minimum-cost open tour from ``start`` over all feasible goals.

    Goals in ``invalid`` are skipped entirely. Raises NoFeasibleTour when
    no finite completion exists.
    """
    c = np.asarray(cost, dtype=float)
    k = c.shape[0]
    if c.shape != (k, k):
        raise ValueError("cost matrix must be square")
    if k > HARD_CAP:
        raise ValueError(f"goal count {k} exceeds the hard cap {HARD_CAP}")
    if start in invalid:
        raise ValueError("start goal cannot be invalid")
    others = [i for i in range(k) if i != start and i not in invalid]
    m = len(others)
    if m == 0:
        return Tour(order=[start], cost=0.0, leg_costs=[])

    full = (1 << m) - 1
    # g[j][mask]: min cost of a path starting at node j visiting exactly
    # the subset `mask` of `others`; right-associated sums so the brute
    # force oracle can reproduce costs bit-for-bit.
    g = np.full((k, full + 1), math.inf)
    g[:, 0] = 0.0
    for mask in range(1, full + 1):
        sub = mask
        members = []
        while sub:
            b = sub & (-sub)
            members.append(b.bit_length() - 1)
            sub ^= b
        for j in range(k):
            if j != start and (j in invalid):
                continue
            best = math.inf
            for bi in members:
                nxt = others[bi]
                if nxt == j:
                    continue
                step = c[j, nxt]
                rest = g[nxt, mask ^ (1 << bi)]
                if math.isinf(step) or math.isinf(rest):
                    continue
                cand = step + rest
                if cand < best:
                    best = cand
            g[j, mask] = best
    total = g[start, full]
    if math.isinf(total):
        raise NoFeasibleTour("every completion has infinite cost")

    # forward reconstruction, smallest feasible index first at equal cost
    order = [start]
    legs = []
    j, mask = start, full
    while mask:
        chosen = None
        for bi in sorted(range(m), key=lambda b: others[b]):
            if not (mask >> bi) & 1:
                continue
            nxt = others[bi]
            step = c[j, nxt]
            rest = g[nxt, mask ^ (1 << bi)]
            if math.isinf(step) or math.isinf(rest):
                continue
            if step + rest == g[j, mask]:
                chosen = (bi, nxt, step)
                break
        if chosen is None:  # numerical guard; cannot happen with exact sums
            raise NoFeasibleTour("reconstruction failed")
        bi, nxt, step = chosen
        order.append(nxt)
        legs.append(float(step))
        mask ^= (1 << bi)
        j = nxt
    return Tour(order=order, cost=float(total), leg_costs=legs)


def replan_tour(robot_costs, goal_costs, invalid=frozenset()) -> Tour:
    """Open tour from the robot (index 0) over the remaining goals.

    ``robot_costs[j]`` is the robot-to-goal-j cost; ``goal_costs`` the
    inter-goal matrix. Row/column rules: nothing returns to the robot, and
    robot transitions into invalid goals are infinite (those goals are
    also skipped by the DP). Returned indices are 0 for the robot and
    1..K for the goals.
    """
    goal_costs = np.asarray(goal_costs, dtype=float)
    k = goal_costs.shape[0]
    c = np.full((k + 1, k + 1), math.inf)
    c[0, 0] = 0.0
    c[1:, 1:] = goal_costs
    for j in range(k):
        c[0, j + 1] = math.inf if j in invalid else robot_costs[j]
    # c[i][0] stays inf for i != 0: no path from a goal back to the robot
    shifted_invalid = frozenset(j + 1 for j in invalid)
    return held_karp(c, start=0, invalid=shifted_invalid)
