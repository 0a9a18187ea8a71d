"""Grid solver for the reach-avoid HJI variational inequality.

``solve_hji_vi`` runs the backward recursion in remaining horizon tau:
start from V(., 0) = max(ell, g), advance the PDE branch with a global
Lax-Friedrichs numerical Hamiltonian, freeze at the target (min with ell,
so the stored field is the reach-*within*-horizon value and slices nest),
and project onto the admissible set (max with g) every internal step.

Dissipation coefficients are the sharp bounds on |dH/dp| per axis:
alpha_x = alpha_y = v_max + d_bar, alpha_theta = omega_max + d_theta_bar.
The internal step is CFL-derived and independent of the output cadence.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import Bounds
from .grid import Grid3, ScalarField, ValueField


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disk radius must be positive")

    def signed_distance(self, x, y):
        """Positive inside (obstacle convention)."""
        return self.radius - np.hypot(np.asarray(x) - self.center[0],
                                      np.asarray(y) - self.center[1])

    def contains(self, x, y):
        return self.signed_distance(x, y) >= 0


def sdf_target(grid: Grid3, radius: float) -> ScalarField:
    """ell(x, y, theta) = ||(x, y)|| - radius, heading-independent."""
    if radius <= 0:
        raise ValueError("target radius must be positive")
    X, Y, _ = grid.meshes()
    return ScalarField(grid, np.hypot(X, Y) - radius)


def sdf_obstacles(grid: Grid3, obstacles) -> ScalarField:
    """g = pointwise max over disk interiors; empty set maps to -diagonal."""
    X, Y, _ = grid.meshes()
    if not obstacles:
        return ScalarField(grid, np.full(grid.dims, -grid.diagonal()))
    data = np.full(grid.dims, -np.inf)
    for obs in obstacles:
        np.maximum(data, obs.signed_distance(X, Y), out=data)
    return ScalarField(grid, data)


def cfl_step(grid: Grid3, b: Bounds, cfl: float = 0.5) -> float:
    hx, hy, hth = grid.spacing
    ax = ay = b.v_max + b.d_bar
    ath = b.omega_max + b.d_theta_bar
    return cfl / (ax / hx + ay / hy + ath / hth)


def solve_hji_vi(grid: Grid3, ell: ScalarField, g: ScalarField, b: Bounds,
                 T: float, dt_out: float, dt_internal: float = None,
                 cfl: float = 0.5) -> ValueField:
    """Solve the reach-avoid VI, storing slices every ``dt_out`` up to T.

    ``dt_internal`` pins the internal Euler step; left unset it is derived
    from the CFL condition and shrunk to divide ``dt_out`` evenly. A pinned
    step that violates CFL, or an output cadence finer than the pinned
    step, is an error.
    """
    if T <= 0 or dt_out <= 0:
        raise ValueError("T and dt_out must be positive")
    if ell.grid != grid or g.grid != grid:
        raise ValueError("fields must live on the solve grid")
    dt_max = cfl_step(grid, b, cfl)
    if dt_internal is not None:
        if dt_internal > dt_max * (1 + 1e-12):
            raise ValueError(
                f"CFL violation: internal step {dt_internal:.4g} exceeds "
                f"stable limit {dt_max:.4g}")
        if dt_out < dt_internal * (1 - 1e-12):
            raise ValueError("dt_out must be at least the internal step")
        dt_max = dt_internal
    n_sub = max(1, int(math.ceil(dt_out / dt_max - 1e-12)))
    dt = dt_out / n_sub
    n_out = int(round(T / dt_out))
    if abs(n_out * dt_out - T) > 1e-9:
        raise ValueError("T must be an integer multiple of dt_out")

    hx, hy, hth = grid.spacing
    thetas = grid.axis(2)
    cos_t = np.cos(thetas)
    sin_t = np.sin(thetas)

    slices = np.empty((n_out + 1,) + tuple(grid.dims))
    slices[0] = np.maximum(ell.data, g.data)
    V = slices[0]
    for k in range(1, n_out + 1):
        V = _kernels.lf_advance(V, ell.data, g.data, n_sub, dt, hx, hy, hth,
                                cos_t, sin_t, b.v_min, b.v_max, b.omega_max,
                                b.d_bar, b.d_theta_bar)
        if not np.all(np.isfinite(V)):
            raise FloatingPointError("solver produced non-finite values")
        slices[k] = V
    return ValueField(grid=grid, times=dt_out * np.arange(n_out + 1),
                      values=slices)
