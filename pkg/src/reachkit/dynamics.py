"""Unicycle dynamics with bounded control and adversarial disturbance.

The closed-form Hamiltonian, optimal control and worst-case disturbance
all come from bang-bang optimization of the bilinear game Hamiltonian
    H(x, p) = sup_d inf_u <p, f(x, u, d)>
for the unicycle flow f = (v cos th + dx, v sin th + dy, omega + dth).
"""

from dataclasses import dataclass

import numpy as np

from .grid import DomainError, wrap_angle


@dataclass
class State:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        self.theta = float(wrap_angle(self.theta))

    @property
    def position(self):
        return np.array([self.x, self.y])

    def as_array(self):
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class Control:
    v: float
    omega: float


@dataclass(frozen=True)
class Disturbance:
    dx: float = 0.0
    dy: float = 0.0
    dtheta: float = 0.0


ZERO_DISTURBANCE = Disturbance()


@dataclass(frozen=True)
class Bounds:
    """Control and disturbance bounds; M_f is the drift speed bound."""

    v_min: float = 0.0
    v_max: float = 1.0
    omega_max: float = 1.0
    d_bar: float = 0.1
    d_theta_bar: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.v_min <= self.v_max):
            raise ValueError("need 0 <= v_min <= v_max")
        if self.omega_max <= 0:
            raise ValueError("omega_max must be positive")
        if self.d_bar < 0 or self.d_theta_bar < 0:
            raise ValueError("disturbance bounds must be nonnegative")

    @property
    def m_f(self):
        return float(np.hypot(self.v_max, self.omega_max))

    def clip_control(self, u: Control) -> Control:
        return Control(float(np.clip(u.v, self.v_min, self.v_max)),
                       float(np.clip(u.omega, -self.omega_max, self.omega_max)))


@dataclass(frozen=True)
class Costate:
    px: float
    py: float
    ptheta: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.px, self.py, self.ptheta])):
            raise ValueError("costate entries must be finite")


def flow(s: State, u: Control, d: Disturbance = ZERO_DISTURBANCE):
    """State derivative (xdot, ydot, thetadot)."""
    c, sn = np.cos(s.theta), np.sin(s.theta)
    return np.array([u.v * c + d.dx, u.v * sn + d.dy, u.omega + d.dtheta])


def hamiltonian(s: State, p: Costate, b: Bounds) -> float:
    """Worst-case game Hamiltonian sup_d inf_u <p, f>."""
    a = p.px * np.cos(s.theta) + p.py * np.sin(s.theta)
    return float(min(b.v_min * a, b.v_max * a)
                 - b.omega_max * abs(p.ptheta)
                 + b.d_bar * np.hypot(p.px, p.py)
                 + b.d_theta_bar * abs(p.ptheta))


def optimal_control(s: State, p: Costate, b: Bounds) -> Control:
    """Minimizer of <p, f>; ties resolve to v_min and omega = 0."""
    a = p.px * np.cos(s.theta) + p.py * np.sin(s.theta)
    v = b.v_min if a >= 0.0 else b.v_max
    omega = -b.omega_max * float(np.sign(p.ptheta))
    return Control(float(v), omega)


def worst_disturbance(s: State, p: Costate, b: Bounds) -> Disturbance:
    """Maximizer of <p, f>: push along the planar gradient, twist with ptheta."""
    norm = np.hypot(p.px, p.py)
    if norm > 0.0:
        dx, dy = b.d_bar * p.px / norm, b.d_bar * p.py / norm
    else:
        dx = dy = 0.0
    return Disturbance(float(dx), float(dy),
                       float(b.d_theta_bar * np.sign(p.ptheta)))


@dataclass
class Trajectory:
    """Fixed-step rollout: n+1 stamped states, n held (control, disturbance)."""

    t: np.ndarray
    states: np.ndarray        # (n+1, 3)
    controls: np.ndarray      # (n, 2)
    disturbances: np.ndarray  # (n, 3)

    @property
    def final_state(self) -> State:
        x, y, th = self.states[-1]
        return State(float(x), float(y), float(th))

    def speeds(self):
        """Planar speed at each step start (held over the step)."""
        th = self.states[:-1, 2]
        vx = self.controls[:, 0] * np.cos(th) + self.disturbances[:, 0]
        vy = self.controls[:, 0] * np.sin(th) + self.disturbances[:, 1]
        return np.hypot(vx, vy)


def rk4_step(s: State, u: Control, d: Disturbance, dt: float) -> State:
    """One RK4 step with held inputs; wraps theta afterwards."""
    y0 = s.as_array()

    def f(y):
        c, sn = np.cos(y[2]), np.sin(y[2])
        return np.array([u.v * c + d.dx, u.v * sn + d.dy, u.omega + d.dtheta])

    k1 = f(y0)
    k2 = f(y0 + 0.5 * dt * k1)
    k3 = f(y0 + 0.5 * dt * k2)
    k4 = f(y0 + dt * k3)
    y = y0 + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return State(float(y[0]), float(y[1]), float(y[2]))


def integrate(s0: State, control_policy, disturbance_policy, dt: float,
              horizon: float) -> Trajectory:
    """Fixed-step RK4 rollout with policies sampled and held per step.

    Policies are callables (t, State) -> Control / Disturbance. Non-finite
    policy outputs are rejected with ValueError.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be positive")
    n = max(1, int(round(horizon / dt)))
    ts = dt * np.arange(n + 1)
    states = np.empty((n + 1, 3))
    controls = np.empty((n, 2))
    dists = np.empty((n, 3))
    s = State(s0.x, s0.y, s0.theta)
    states[0] = s.as_array()
    for i in range(n):
        u = control_policy(ts[i], s)
        d = disturbance_policy(ts[i], s)
        if not np.all(np.isfinite([u.v, u.omega, d.dx, d.dy, d.dtheta])):
            raise ValueError("policy produced non-finite output")
        s = rk4_step(s, u, d, dt)
        states[i + 1] = s.as_array()
        controls[i] = (u.v, u.omega)
        dists[i] = (d.dx, d.dy, d.dtheta)
    return Trajectory(t=ts, states=states, controls=controls, disturbances=dists)


def trajectory_cost(traj: Trajectory, ell, g) -> float:
    """Reach-avoid cost max(ell at the end, max of g along the way).

    ``ell`` and ``g`` are ScalarFields covering the trajectory support;
    leaving their domain raises DomainError.
    """
    if len(traj.states) == 0:
        raise ValueError("empty trajectory")
    xs, ys, ths = traj.states[:, 0], traj.states[:, 1], traj.states[:, 2]
    if not np.all(g.grid.contains_xy(xs, ys)):
        raise DomainError("trajectory leaves the field domain")
    g_vals = g(xs, ys, ths)
    ell_end = ell(xs[-1], ys[-1], ths[-1])
    return float(max(ell_end, np.max(g_vals)))
