"""Certified recovery controller.

The controller descends the gradient of the augmented value
Vtilde(x, t) = max(V(x, t), g(x)) toward the safe set, probing the HJI
residual D_t = dV/dt_backward + H(x, grad Vtilde) at every step; wherever
the learned field violates the inequality (residual > 0) it falls back to
the obstacle-free oracle value for one control step. The adversary plays
the worst-case disturbance against the active branch's gradient.

Everything here works in the local frame of one safe set: the target disk
sits at the origin and the value fields are the local-domain solutions.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Bounds, Costate, State, hamiltonian, optimal_control, \
    rk4_step, worst_disturbance
from .grid import DomainError, ValueField


@dataclass
class AugmentedValue:
    """max(V, g) with derivatives straddling the max kink.

    ``g`` is evaluated analytically from the disk list (the empty list
    maps to the grid-diagonal sentinel), so the projection is exact rather
    than re-rasterized on every obstacle update.
    """

    vf: ValueField
    obstacles: list = field(default_factory=list)

    def g_value(self, x, y):
        if not self.obstacles:
            return -self.vf.grid.diagonal()
        return float(max(o.signed_distance(x, y) for o in self.obstacles))

    def value(self, x, y, theta, t):
        return float(max(self.vf.interpolate(x, y, theta, t),
                         self.g_value(x, y)))

    def gradient(self, x, y, theta, t) -> np.ndarray:
        """Central differences of the composed max, one grid spacing steps."""
        g = self.vf.grid
        hx, hy, hth = g.spacing
        (x0, x1), (y0, y1), _ = g.bounds

        def d_axis(lo, hi, h, build):
            up, dn = build(h), build(-h)
            c = build(0.0)
            hi_ok = up is not None
            lo_ok = dn is not None
            if hi_ok and lo_ok:
                return (up - dn) / (2.0 * h)
            if hi_ok:
                return (up - c) / h
            return (c - dn) / h

        def vx(dx):
            xq = x + dx
            if not (x0 <= xq <= x1):
                return None
            return self.value(xq, y, theta, t)

        def vy(dy):
            yq = y + dy
            if not (y0 <= yq <= y1):
                return None
            return self.value(x, yq, theta, t)

        px = d_axis(x0, x1, hx, vx)
        py = d_axis(y0, y1, hy, vy)
        pth = (self.value(x, y, theta + hth, t)
               - self.value(x, y, theta - hth, t)) / (2.0 * hth)
        return np.array([px, py, pth])

    def time_slope(self, x, y, theta, t):
        """d/d(horizon) of the augmented value over stored-slice spacing."""
        times = self.vf.times
        if len(times) == 1:
            return 0.0
        k = min(max(int(np.searchsorted(times, t, side="right")) - 1, 0),
                len(times) - 2)
        dt = times[k + 1] - times[k]
        up = min(t + dt, float(times[-1]))
        dn = max(t - dt, 0.0)
        return (self.value(x, y, theta, up) - self.value(x, y, theta, dn)) \
            / (up - dn)


def residual(av: AugmentedValue, s: State, t: float, b: Bounds) -> float:
    """HJI residual in the backward-time convention: -dV/dtau + H."""
    if not (0.0 <= t <= av.vf.horizon + 1e-9):
        raise DomainError(f"horizon {t} out of range")
    grad = av.gradient(s.x, s.y, s.theta, t)
    H = hamiltonian(s, Costate(*grad), b)
    return float(-av.time_slope(s.x, s.y, s.theta, t) + H)


def value_batch(av: AugmentedValue, xs, ys, ths, ts):
    """Vectorized augmented-value evaluation (arrays of query points)."""
    from . import _kernels

    vf = av.vf
    g = vf.grid
    hx, hy, hth = g.spacing
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    ths = np.asarray(ths, float)
    ts = np.asarray(ts, float)
    times = vf.times
    out = np.empty(xs.shape)
    if len(times) == 1:
        out[:] = _kernels.trilinear(vf.values[0], xs, ys, ths,
                                    g.bounds[0][0], hx, g.bounds[1][0], hy,
                                    g.bounds[2][0], hth)
    else:
        k = np.clip(np.searchsorted(times, ts, side="right") - 1,
                    0, len(times) - 2)
        w = (ts - times[k]) / (times[k + 1] - times[k])
        for kk in np.unique(k):
            m = k == kk
            v0 = _kernels.trilinear(vf.values[kk], xs[m], ys[m], ths[m],
                                    g.bounds[0][0], hx, g.bounds[1][0], hy,
                                    g.bounds[2][0], hth)
            v1 = _kernels.trilinear(vf.values[kk + 1], xs[m], ys[m], ths[m],
                                    g.bounds[0][0], hx, g.bounds[1][0], hy,
                                    g.bounds[2][0], hth)
            out[m] = v0 * (1 - w[m]) + v1 * w[m]
    if av.obstacles:
        gv = np.full(xs.shape, -np.inf)
        for o in av.obstacles:
            np.maximum(gv, o.signed_distance(xs, ys), out=gv)
    else:
        gv = np.full(xs.shape, -g.diagonal())
    return np.maximum(out, gv)


def residual_batch(av: AugmentedValue, xs, ys, ths, ts, b: Bounds):
    """Vectorized HJI residual probe (matches ``residual`` pointwise)."""
    from ._kernels import hamiltonian_terms

    g = av.vf.grid
    hx, hy, hth = g.spacing
    (x0, x1), (y0, y1), _ = g.bounds
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    ths = np.asarray(ths, float)
    ts = np.asarray(ts, float)

    def f(dx=0.0, dy=0.0, dth=0.0, tq=None):
        return value_batch(av, np.clip(xs + dx, x0, x1),
                           np.clip(ys + dy, y0, y1), ths + dth,
                           ts if tq is None else tq)

    f0 = f()

    def d_axis(coord, lo, hi, h, fp, fm):
        up_ok = coord + h <= hi
        dn_ok = coord - h >= lo
        central = (fp - fm) / (2 * h)
        fwd = (fp - f0) / h
        bwd = (f0 - fm) / h
        return np.where(up_ok & dn_ok, central, np.where(up_ok, fwd, bwd))

    px = d_axis(xs, x0, x1, hx, f(dx=hx), f(dx=-hx))
    py = d_axis(ys, y0, y1, hy, f(dy=hy), f(dy=-hy))
    pth = (f(dth=hth) - f(dth=-hth)) / (2 * hth)

    times = av.vf.times
    if len(times) == 1:
        slope = np.zeros(xs.shape)
    else:
        k = np.clip(np.searchsorted(times, ts, side="right") - 1,
                    0, len(times) - 2)
        dt = times[k + 1] - times[k]
        up = np.minimum(ts + dt, times[-1])
        dn = np.maximum(ts - dt, 0.0)
        slope = (f(tq=up) - f(tq=dn)) / (up - dn)

    thetas = ths
    H = hamiltonian_terms(px, py, pth, np.cos(thetas), np.sin(thetas),
                          b.v_min, b.v_max, b.omega_max, b.d_bar,
                          b.d_theta_bar)
    return -slope + H


def select_t_min(vf: ValueField, s: State, t_range, epsilon: float):
    """Smallest stored-slice horizon in range with V(s, t) <= -epsilon."""
    lo, hi = t_range
    for k, t in enumerate(vf.times):
        if t < lo - 1e-9 or t > hi + 1e-9:
            continue
        if vf.interpolate(s.x, s.y, s.theta, float(t)) <= -epsilon:
            return float(t)
    return None


def switching_policy(av_learned: AugmentedValue, av_fallback: AugmentedValue,
                     s: State, t: float, b: Bounds):
    """Residual-gated branch switch: learned gradient unless the probe says
    the learned field violates the HJI descent condition here."""
    if residual(av_learned, s, t, b) <= 0.0:
        grad = av_learned.gradient(s.x, s.y, s.theta, t)
        branch = "learned"
    else:
        grad = av_fallback.gradient(s.x, s.y, s.theta, t)
        branch = "fallback"
    return optimal_control(s, Costate(*grad), b), grad, branch


@dataclass
class ContingencyOutcome:
    reached: bool
    t_reach: float
    final_value: float
    min_g_margin: float          # max of g along the trajectory
    switch_count: int
    fallback_steps: int
    steps: int
    t_min_initial: float
    reselections: int
    trace: list                  # rows: t, x, y, th, v, om, dx, dy, dth, V, branch, g

    @property
    def failed(self):
        return not self.reached


class LocalWorld:
    """Disk world in a safe set's local frame with center-distance sensing."""

    def __init__(self, safe_radius, obstacles, known=None, r_sense=5.5,
                 empty_g=-20.0 * np.sqrt(2.0)):
        self.safe_radius = float(safe_radius)
        self.obstacles = list(obstacles)
        self.known = list(known) if known is not None else []
        self.r_sense = float(r_sense)
        self.empty_g = float(empty_g)

    def sense(self, x, y):
        new = []
        for o in self.obstacles:
            if o in self.known:
                continue
            if np.hypot(o.center[0] - x, o.center[1] - y) <= self.r_sense:
                new.append(o)
        self.known.extend(new)
        return new

    def true_g(self, x, y):
        if not self.obstacles:
            return self.empty_g
        return float(max(o.signed_distance(x, y) for o in self.obstacles))


def _inflate(disks, margin):
    from .levelset import Disk
    return [Disk(center=d.center, radius=d.radius + margin) for d in disks]


def execute_contingency(world: LocalWorld, s0: State, learned_backend,
                        fallback_vf: ValueField, b: Bounds, dt: float = 0.05,
                        t_range=(4.0, 8.0), epsilon: float = 0.0,
                        time_offset: float = 0.0,
                        inflate: float = 0.15) -> ContingencyOutcome:
    """Closed-loop recovery run under worst-case disturbance.

    ``learned_backend`` supplies value fields per known-obstacle set (and
    is re-evaluated whenever sensing reveals a new disk); ``fallback_vf``
    is the obstacle-free oracle solution. Known disks are inflated by
    ``inflate`` wherever they feed the value side (sensors report
    over-approximations), while collision accounting uses the raw world.
    The loop terminates on safe-disk entry, horizon exhaustion, or
    obstacle contact.
    """
    s = State(s0.x, s0.y, s0.theta)
    world.sense(s.x, s.y)
    known = _inflate(world.known, inflate)
    av_learned = AugmentedValue(learned_backend.value_field(known), known)
    av_fallback = AugmentedValue(fallback_vf, known)

    t_min = select_t_min(av_learned.vf, s, t_range, epsilon)
    if t_min is None:
        raise ValueError("start state is outside every reach set in range")
    tau = t_min
    elapsed = 0.0
    trace = []
    switch_count = 0
    fallback_steps = 0
    reselections = 0
    prev_branch = "learned"
    max_g = -np.inf
    reached = False

    while True:
        ell = float(np.hypot(s.x, s.y)) - world.safe_radius
        g_true = world.true_g(s.x, s.y)
        max_g = max(max_g, g_true)
        if ell <= 0.0:
            reached = True
            break
        if g_true > 0.0:
            break
        if tau <= 1e-9:
            break

        new = world.sense(s.x, s.y)
        if new:
            known = _inflate(world.known, inflate)
            av_learned = AugmentedValue(learned_backend.value_field(known),
                                        known)
            av_fallback = AugmentedValue(fallback_vf, known)
            t_new = select_t_min(av_learned.vf, s, t_range, epsilon)
            reselections += 1
            if t_new is not None:
                tau = t_new

        u, grad, branch = switching_policy(av_learned, av_fallback, s, tau, b)
        if branch == "fallback":
            fallback_steps += 1
            if prev_branch != "fallback":
                switch_count += 1
        prev_branch = branch
        d = worst_disturbance(s, Costate(*grad), b)
        trace.append([time_offset + elapsed, s.x, s.y, s.theta, u.v, u.omega,
                      d.dx, d.dy, d.dtheta,
                      av_learned.value(s.x, s.y, s.theta, tau), branch,
                      g_true])
        step = min(dt, tau)
        s = rk4_step(s, u, d, step)
        tau -= step
        elapsed += step

    final_value = float(max(np.hypot(s.x, s.y) - world.safe_radius,
                            world.true_g(s.x, s.y)))
    trace.append([time_offset + elapsed, s.x, s.y, s.theta, 0.0, 0.0,
                  0.0, 0.0, 0.0, final_value, "end", world.true_g(s.x, s.y)])
    return ContingencyOutcome(
        reached=reached,
        t_reach=float(elapsed),
        final_value=final_value,
        min_g_margin=float(max_g),
        switch_count=switch_count,
        fallback_steps=fallback_steps,
        steps=len(trace) - 1,
        t_min_initial=float(t_min),
        reselections=reselections,
        trace=trace,
    )
