"""Incremental shortest-path-to-goal sampling planner.

Per goal we keep one graph plus a goal-rooted shortest-path tree. The
planner keeps the tree exactly Dijkstra-consistent after every mutation:
new vertices relax their neighborhoods through a priority-queue cascade,
and obstacle insertion prunes dead vertices/edges, collects the orphaned
subtrees and repairs them with the same cascade. Exact consistency is
checked against a full Dijkstra recomputation in the tests.

Vertices and edges are admitted only if they pass the collision test
against the known obstacle disks and (when given) the feasible-region
predicate; rejected samples are counted, never fatal.
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class SamplerConfig:
    """Mixture sampler: anchor Gaussians + uniform + goal bias (+ robot bias)."""

    gauss_weight: float = 0.7
    uniform_weight: float = 0.2
    goal_weight: float = 0.1
    gauss_std: float = 3.0
    robot_weight: float = 0.3  # applied only while a tree is marked invalid

    def __post_init__(self):
        total = self.gauss_weight + self.uniform_weight + self.goal_weight
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError("mixture weights must sum to 1")
        if min(self.gauss_weight, self.uniform_weight, self.goal_weight,
               self.robot_weight) < 0:
            raise ValueError("weights must be nonnegative")


def _contains_batch(feasible, xs, ys):
    fn = getattr(feasible, "contains_batch", None)
    if fn is not None:
        return np.asarray(fn(xs, ys), dtype=bool)
    return np.array([feasible.contains(float(x), float(y))
                     for x, y in zip(np.atleast_1d(xs), np.atleast_1d(ys))])


@dataclass
class GrowStats:
    accepted: int = 0
    rejected_infeasible: int = 0
    rejected_collision: int = 0
    attempts: int = 0


class PlanGraph:
    """Geometric graph with a shortest-path tree rooted at the goal."""

    def __init__(self, goal, domain, delta=0.5, gamma=None, seed=0,
                 sampler: SamplerConfig = None, anchors=(), margin=0.0):
        self.goal = np.asarray(goal, dtype=float)
        self.domain = domain  # ((xmin, xmax), (ymin, ymax))
        self.delta = float(delta)
        area = (domain[0][1] - domain[0][0]) * (domain[1][1] - domain[1][0])
        self.gamma = float(gamma) if gamma is not None else \
            2.0 * math.sqrt(3.0 * area / (2.0 * math.pi))
        self.margin = float(margin)
        self.sampler = sampler or SamplerConfig()
        self.anchors = [np.asarray(a, dtype=float) for a in anchors]
        self.rng = np.random.default_rng(seed)

        cap = 256
        self.xs = np.empty(cap)
        self.ys = np.empty(cap)
        self.alive = np.zeros(cap, dtype=bool)
        self.parent = np.full(cap, -1, dtype=np.int64)
        self.cost = np.full(cap, np.inf)
        self.adj = []
        self.n = 0
        self.robot_bias_point = None

        root = self._add_vertex(self.goal[0], self.goal[1])
        self.cost[root] = 0.0

    # -- storage ------------------------------------------------------------

    def _ensure_capacity(self):
        if self.n < len(self.xs):
            return
        cap = 2 * len(self.xs)
        for name in ("xs", "ys", "cost"):
            arr = getattr(self, name)
            new = np.full(cap, np.inf) if name == "cost" else np.empty(cap)
            new[:self.n] = arr[:self.n]
            setattr(self, name, new)
        alive = np.zeros(cap, dtype=bool)
        alive[:self.n] = self.alive[:self.n]
        self.alive = alive
        parent = np.full(cap, -1, dtype=np.int64)
        parent[:self.n] = self.parent[:self.n]
        self.parent = parent

    def _add_vertex(self, x, y):
        self._ensure_capacity()
        i = self.n
        self.xs[i] = x
        self.ys[i] = y
        self.alive[i] = True
        self.adj.append([])
        self.n += 1
        return i

    def vertex(self, i):
        return np.array([self.xs[i], self.ys[i]])

    def neighbor_radius(self):
        n = max(self.n, 2)
        return min(self.delta, self.gamma * math.sqrt(math.log(n) / n))

    # -- geometry -----------------------------------------------------------

    def _segment_hits_disk(self, p, q, obstacles):
        for obs in obstacles:
            r = obs.radius + self.margin
            c = np.asarray(obs.center, dtype=float)
            d = q - p
            seg2 = float(d @ d)
            if seg2 == 0.0:
                if float(np.hypot(*(p - c))) <= r:
                    return True
                continue
            u = float(np.clip((c - p) @ d / seg2, 0.0, 1.0))
            closest = p + u * d
            if float(np.hypot(*(closest - c))) <= r:
                return True
        return False

    EDGE_FRACTIONS = np.array([0.25, 0.5, 0.75])

    # -- sampling -----------------------------------------------------------

    def _sample(self, invalid=False):
        u = self.rng.random()
        sc = self.sampler
        if invalid and self.robot_bias_point is not None:
            if u < sc.robot_weight:
                return self.robot_bias_point + self.rng.normal(
                    0.0, 2.0 * self.delta, 2)
            u = (u - sc.robot_weight) / (1.0 - sc.robot_weight)
        if u < sc.gauss_weight:
            if self.anchors:
                c = self.anchors[self.rng.integers(len(self.anchors))]
                return c + self.rng.normal(0.0, sc.gauss_std, 2)
            u = sc.gauss_weight + u * (sc.uniform_weight + sc.goal_weight) \
                / sc.gauss_weight  # no anchors: fold into the other components
        if u < sc.gauss_weight + sc.uniform_weight:
            (x0, x1), (y0, y1) = self.domain
            return np.array([self.rng.uniform(x0, x1), self.rng.uniform(y0, y1)])
        return self.goal.copy()

    # -- growth -------------------------------------------------------------

    def grow(self, count, feasible=None, obstacles=(), invalid=False,
             max_attempts=None) -> GrowStats:
        """Insert up to ``count`` vertices (attempt-capped), rewiring as we go."""
        stats = GrowStats()
        budget = max_attempts if max_attempts is not None else 60 * count
        (x0, x1), (y0, y1) = self.domain
        while stats.accepted < count and stats.attempts < budget:
            stats.attempts += 1
            sample = self._sample(invalid=invalid)
            sample[0] = min(max(sample[0], x0), x1)
            sample[1] = min(max(sample[1], y0), y1)
            near = self._nearest(sample)
            if near is None:
                break
            p_near = self.vertex(near)
            step = sample - p_near
            dist = float(np.hypot(*step))
            if dist < 1e-9:
                continue
            p_new = p_near + step * min(1.0, self.delta / dist)
            if feasible is not None and not feasible.contains(p_new[0], p_new[1]):
                stats.rejected_infeasible += 1
                continue
            if self._segment_hits_disk(p_new, p_new, obstacles):
                stats.rejected_collision += 1
                continue
            nbrs = self._neighbors_within(p_new, self.neighbor_radius())
            links = []
            duplicate = False
            for j, dj in nbrs:
                if dj < 1e-12:
                    duplicate = True
                    break
                if self._segment_hits_disk(p_new, self.vertex(j), obstacles):
                    continue
                links.append((j, dj))
            if duplicate or not links:
                stats.rejected_collision += 1
                continue
            if feasible is not None:
                # one batched check over the interior samples of every link
                # (endpoints are already known feasible: p_new was tested and
                # alive vertices satisfy the sweep invariant)
                qx = np.array([self.xs[j] for j, _ in links])
                qy = np.array([self.ys[j] for j, _ in links])
                fr = self.EDGE_FRACTIONS
                sx = p_new[0] + fr[None, :] * (qx[:, None] - p_new[0])
                sy = p_new[1] + fr[None, :] * (qy[:, None] - p_new[1])
                ok = _contains_batch(feasible, sx.ravel(), sy.ravel())
                ok = ok.reshape(sx.shape).all(axis=1)
                links = [lk for lk, good in zip(links, ok) if good]
                if not links:
                    stats.rejected_infeasible += 1
                    continue
            i = self._add_vertex(p_new[0], p_new[1])
            for j, dj in links:
                self.adj[i].append((j, dj))
                self.adj[j].append((i, dj))
            best = min(((self.cost[j] + dj, j) for j, dj in links),
                       key=lambda t: t[0])
            if np.isfinite(best[0]):
                self.cost[i] = best[0]
                self.parent[i] = best[1]
            self._cascade([i])
            stats.accepted += 1
        return stats

    def _nearest(self, p):
        if self.n == 0:
            return None
        d2 = (self.xs[:self.n] - p[0]) ** 2 + (self.ys[:self.n] - p[1]) ** 2
        d2[~self.alive[:self.n]] = np.inf
        i = int(np.argmin(d2))
        return i if np.isfinite(d2[i]) else None

    def _neighbors_within(self, p, r):
        d2 = (self.xs[:self.n] - p[0]) ** 2 + (self.ys[:self.n] - p[1]) ** 2
        idx = np.flatnonzero((d2 <= r * r) & self.alive[:self.n])
        return [(int(j), float(math.sqrt(d2[j]))) for j in idx]

    # -- exact-consistency cascade -------------------------------------------

    def _cascade(self, seeds):
        """Priority-queue relaxation from the seed vertices to a fixpoint."""
        heap = [(self.cost[s], s) for s in seeds if np.isfinite(self.cost[s])]
        heapq.heapify(heap)
        while heap:
            c, u = heapq.heappop(heap)
            if c > self.cost[u] + 1e-15:
                continue  # stale entry
            for v, w in self.adj[u]:
                if not self.alive[v]:
                    continue
                nc = self.cost[u] + w
                if nc < self.cost[v] - 1e-15:
                    self.cost[v] = nc
                    self.parent[v] = u
                    heapq.heappush(heap, (nc, v))

    # -- obstacle insertion ---------------------------------------------------

    def _edges(self):
        """All stored edges (i < j) as index/weight arrays."""
        ii, jj, ww = [], [], []
        for i in range(self.n):
            for j, w in self.adj[i]:
                if i < j:
                    ii.append(i)
                    jj.append(j)
                    ww.append(w)
        return (np.asarray(ii, dtype=np.int64), np.asarray(jj, dtype=np.int64),
                np.asarray(ww))

    def insert_obstacle(self, obstacle):
        """Prune the disk, repair orphans; returns an invalidation report."""
        n = self.n
        xs, ys = self.xs[:n], self.ys[:n]
        dead_v = self.alive[:n] & (obstacle.signed_distance(xs, ys) >= -self.margin)
        ii, jj, _ = self._edges()
        if len(ii):
            px, py = xs[ii], ys[ii]
            dxe, dye = xs[jj] - px, ys[jj] - py
            seg2 = dxe**2 + dye**2
            cx, cy = obstacle.center
            u = np.clip(((cx - px) * dxe + (cy - py) * dye)
                        / np.where(seg2 > 0, seg2, 1.0), 0.0, 1.0)
            dist = np.hypot(px + u * dxe - cx, py + u * dye - cy)
            dead_e = dist <= obstacle.radius + self.margin
        else:
            dead_e = np.zeros(0, dtype=bool)
        return self._apply_invalidation(dead_v, (ii, jj), dead_e)

    def invalidate_infeasible(self, feasible):
        """Prune vertices/edges that left the (shrunken) feasible region."""
        n = self.n
        xs, ys = self.xs[:n], self.ys[:n]
        ok_v = _contains_batch(feasible, xs, ys)
        dead_v = self.alive[:n] & ~ok_v
        ii, jj, _ = self._edges()
        if len(ii):
            fr = self.EDGE_FRACTIONS
            sx = xs[ii][:, None] + fr[None, :] * (xs[jj] - xs[ii])[:, None]
            sy = ys[ii][:, None] + fr[None, :] * (ys[jj] - ys[ii])[:, None]
            interior_ok = _contains_batch(feasible, sx.ravel(), sy.ravel())
            dead_e = ~(interior_ok.reshape(sx.shape).all(axis=1)
                       & ok_v[ii] & ok_v[jj])
        else:
            dead_e = np.zeros(0, dtype=bool)
        return self._apply_invalidation(dead_v, (ii, jj), dead_e)

    def _apply_invalidation(self, dead_v, edge_idx, dead_e):
        n = self.n
        removed_vertices = [int(i) for i in np.flatnonzero(dead_v) if i != 0]
        for i in removed_vertices:
            self.alive[i] = False
        dead_pairs = set()
        ii, jj = edge_idx
        for k in np.flatnonzero(dead_e):
            dead_pairs.add((int(ii[k]), int(jj[k])))
        removed_edges = 0
        touched = set(removed_vertices)
        for i in range(n):
            if not self.adj[i]:
                continue
            kept = []
            for j, w in self.adj[i]:
                key = (i, j) if i < j else (j, i)
                if not self.alive[i] or not self.alive[j] or key in dead_pairs:
                    if i < j:
                        removed_edges += 1
                    touched.update((i, j))
                    continue
                kept.append((j, w))
            self.adj[i] = kept
        if not touched:
            return {"removed_vertices": 0, "removed_edges": 0,
                    "orphaned": 0, "infinite": 0}

        # orphan closure: every vertex whose parent chain broke
        dead_parent = set(removed_vertices)
        orphans = set()
        live_edges = [set(j for j, _ in self.adj[i]) for i in range(n)]
        for i in range(n):
            if not self.alive[i] or i == 0:
                continue
            p = self.parent[i]
            if p < 0 or p in dead_parent or p not in live_edges[i]:
                orphans.add(i)
        # descendants of orphans are stale too
        children = {}
        for i in range(n):
            if self.alive[i] and self.parent[i] >= 0:
                children.setdefault(int(self.parent[i]), []).append(i)
        stack = list(orphans)
        closure = set()
        while stack:
            v = stack.pop()
            if v in closure:
                continue
            closure.add(v)
            stack.extend(children.get(v, []))
        for v in closure:
            self.cost[v] = np.inf
            self.parent[v] = -1
        for v in removed_vertices:
            self.cost[v] = np.inf
            self.parent[v] = -1

        # Dijkstra repair seeded from the intact frontier
        heap = []
        for v in closure:
            best = None
            for j, w in self.adj[v]:
                if self.alive[j] and j not in closure and np.isfinite(self.cost[j]):
                    c = self.cost[j] + w
                    if best is None or c < best[0]:
                        best = (c, j)
            if best is not None:
                heapq.heappush(heap, (best[0], v, best[1]))
        settled = set()
        while heap:
            c, v, via = heapq.heappop(heap)
            if v in settled or c >= self.cost[v]:
                continue
            self.cost[v] = c
            self.parent[v] = via
            settled.add(v)
            for j, w in self.adj[v]:
                if self.alive[j] and j in closure and j not in settled:
                    nc = c + w
                    if nc < self.cost[j]:
                        heapq.heappush(heap, (nc, j, v))
        infinite = sum(1 for v in closure if not np.isfinite(self.cost[v]))
        return {"removed_vertices": len(removed_vertices),
                "removed_edges": removed_edges,
                "orphaned": len(closure),
                "infinite": infinite}

    # -- queries ---------------------------------------------------------------

    def snap(self, p):
        """Nearest alive vertex within delta of p, or None."""
        i = self._nearest(np.asarray(p, dtype=float))
        if i is None:
            return None
        if float(np.hypot(self.xs[i] - p[0], self.ys[i] - p[1])) > self.delta:
            return None
        return i

    def best_path(self, p):
        """Polyline from the snap of p to the root, or None if disconnected."""
        i = self.snap(p)
        if i is None or not np.isfinite(self.cost[i]):
            return None
        pts = [self.vertex(i)]
        cost = float(self.cost[i])
        guard = 0
        while self.parent[i] >= 0:
            i = int(self.parent[i])
            pts.append(self.vertex(i))
            guard += 1
            if guard > self.n:
                raise RuntimeError("parent pointers form a cycle")
        return {"points": np.array(pts), "cost": cost}

    def robot_reaches(self, p):
        return self.best_path(p) is not None

    # -- checks & export ---------------------------------------------------------

    def check_tree_consistency(self, atol=1e-9):
        for i in range(self.n):
            if not self.alive[i] or not np.isfinite(self.cost[i]):
                continue
            p = self.parent[i]
            if i == 0:
                assert self.cost[0] == 0.0 and p == -1
                continue
            assert p >= 0 and self.alive[p]
            w = next(w for j, w in self.adj[i] if j == p)
            assert abs(self.cost[i] - (self.cost[p] + w)) <= atol

    def dijkstra_costs(self):
        """Independent full recomputation (test oracle)."""
        cost = np.full(self.n, np.inf)
        cost[0] = 0.0
        heap = [(0.0, 0)]
        seen = np.zeros(self.n, dtype=bool)
        while heap:
            c, u = heapq.heappop(heap)
            if seen[u]:
                continue
            seen[u] = True
            for v, w in self.adj[u]:
                if self.alive[v] and c + w < cost[v]:
                    cost[v] = c + w
                    heapq.heappush(heap, (c + w, v))
        return cost

    def to_dict(self):
        return {
            "goal": self.goal.tolist(),
            "n": int(self.n),
            "vertices": np.stack([self.xs[:self.n], self.ys[:self.n]], 1).tolist(),
            "alive": self.alive[:self.n].astype(int).tolist(),
            "parent": self.parent[:self.n].tolist(),
            "cost": [float(c) if np.isfinite(c) else None
                     for c in self.cost[:self.n]],
            "edges": [[i, j, w] for i in range(self.n)
                      for j, w in self.adj[i] if i < j],
        }
