"""Hot numeric kernels: Lax-Friedrichs sweep and trilinear interpolation.

Each kernel has a vectorized numpy reference implementation and an @njit
twin compiled when numba is importable. The public names (``lf_advance``,
``trilinear``) are bound according to ``reachkit._accel.USE_NUMBA``.

Conventions shared by both flavors:
  * fields are float64 arrays of shape (nx, ny, ntheta), x slowest;
  * the theta axis is periodic, x/y use linear-extrapolation ghost nodes
    (which makes the one-sided differences collapse to the interior
    difference at the wall);
  * the sweep advances the value in *remaining horizon*: one Euler step is
      V <- max( min( V + dt*(H(grad V) + dissipation), ell ), g )
    i.e. PDE step, freeze at the target, project onto the admissible set.
"""

import math

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA

__all__ = [
    "hamiltonian_terms",
    "lf_advance",
    "lf_advance_numpy",
    "trilinear",
    "trilinear_numpy",
]


# ---------------------------------------------------------------------------
# pure-numpy reference implementations
# ---------------------------------------------------------------------------

def _diffs(V, h, axis, periodic):
    """One-sided differences (D-, D+) along one axis."""
    if periodic:
        Vm = np.roll(V, 1, axis=axis)
        Vp = np.roll(V, -1, axis=axis)
    else:
        Vm = np.empty_like(V)
        Vp = np.empty_like(V)
        src = [slice(None)] * V.ndim

        def at(i):
            s = list(src)
            s[axis] = i
            return tuple(s)

        Vm[at(slice(1, None))] = V[at(slice(None, -1))]
        Vp[at(slice(None, -1))] = V[at(slice(1, None))]
        # linear-extrapolation ghosts: V[-1] = 2 V[0] - V[1]
        Vm[at(0)] = 2.0 * V[at(0)] - V[at(1)]
        Vp[at(-1)] = 2.0 * V[at(-1)] - V[at(-2)]
    return (V - Vm) / h, (Vp - V) / h


def hamiltonian_terms(px, py, pth, cos_t, sin_t, v_min, v_max, omega_max,
                      d_bar, d_theta_bar):
    """Closed-form worst-case Hamiltonian, vectorized over costate arrays."""
    a = px * cos_t + py * sin_t
    return (
        np.minimum(v_min * a, v_max * a)
        - omega_max * np.abs(pth)
        + d_bar * np.hypot(px, py)
        + d_theta_bar * np.abs(pth)
    )


def lf_advance_numpy(V, ell, g, n_steps, dt, hx, hy, hth, cos_t, sin_t,
                     v_min, v_max, omega_max, d_bar, d_theta_bar):
    """Advance ``n_steps`` Euler steps of the global LF scheme.

    Returns a new array; ``V`` is not mutated. ``cos_t``/``sin_t`` are the
    per-theta-node direction cosines, broadcast over the last axis.
    """
    ax = v_max + d_bar
    ay = v_max + d_bar
    ath = omega_max + d_theta_bar
    cos_b = cos_t[None, None, :]
    sin_b = sin_t[None, None, :]
    V = V.copy()
    for _ in range(n_steps):
        dmx, dpx = _diffs(V, hx, 0, False)
        dmy, dpy = _diffs(V, hy, 1, False)
        dmt, dpt = _diffs(V, hth, 2, True)
        H = hamiltonian_terms(0.5 * (dmx + dpx), 0.5 * (dmy + dpy),
                              0.5 * (dmt + dpt), cos_b, sin_b,
                              v_min, v_max, omega_max, d_bar, d_theta_bar)
        diss = 0.5 * (ax * (dpx - dmx) + ay * (dpy - dmy) + ath * (dpt - dmt))
        V = np.maximum(np.minimum(V + dt * (H + diss), ell), g)
    return V


def trilinear_numpy(F, xq, yq, tq, x0, hx, y0, hy, th0, hth):
    """Batch trilinear interpolation on an (nx, ny, ntheta) field.

    x/y queries must already lie inside the grid bounds (callers validate);
    theta wraps periodically. Returns an array matching the query shape.
    """
    nx, ny, nth = F.shape
    fx = (np.asarray(xq, dtype=np.float64) - x0) / hx
    fy = (np.asarray(yq, dtype=np.float64) - y0) / hy
    ft = (np.asarray(tq, dtype=np.float64) - th0) / hth

    ix = np.clip(np.floor(fx).astype(np.int64), 0, nx - 2)
    iy = np.clip(np.floor(fy).astype(np.int64), 0, ny - 2)
    wx = fx - ix
    wy = fy - iy

    ft = np.mod(ft, nth)
    it = np.floor(ft).astype(np.int64) % nth
    wt = ft - np.floor(ft)
    it1 = (it + 1) % nth

    c000 = F[ix, iy, it]
    c100 = F[ix + 1, iy, it]
    c010 = F[ix, iy + 1, it]
    c110 = F[ix + 1, iy + 1, it]
    c001 = F[ix, iy, it1]
    c101 = F[ix + 1, iy, it1]
    c011 = F[ix, iy + 1, it1]
    c111 = F[ix + 1, iy + 1, it1]

    c00 = c000 * (1 - wx) + c100 * wx
    c10 = c010 * (1 - wx) + c110 * wx
    c01 = c001 * (1 - wx) + c101 * wx
    c11 = c011 * (1 - wx) + c111 * wx
    c0 = c00 * (1 - wy) + c10 * wy
    c1 = c01 * (1 - wy) + c11 * wy
    return c0 * (1 - wt) + c1 * wt


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _lf_advance_jit(V, ell, g, n_steps, dt, hx, hy, hth, cos_t, sin_t,
                        v_min, v_max, omega_max, d_bar, d_theta_bar):
        nx, ny, nth = V.shape
        ax = v_max + d_bar
        ay = v_max + d_bar
        ath = omega_max + d_theta_bar
        cur = V.copy()
        nxt = np.empty_like(V)
        for _ in range(n_steps):
            for i in range(nx):
                for j in range(ny):
                    for k in range(nth):
                        v = cur[i, j, k]
                        # x axis, extrapolation ghosts at the walls
                        vxm = 2.0 * v - cur[1, j, k] if i == 0 else cur[i - 1, j, k]
                        vxp = 2.0 * v - cur[nx - 2, j, k] if i == nx - 1 else cur[i + 1, j, k]
                        vym = 2.0 * v - cur[i, 1, k] if j == 0 else cur[i, j - 1, k]
                        vyp = 2.0 * v - cur[i, ny - 2, k] if j == ny - 1 else cur[i, j + 1, k]
                        vtm = cur[i, j, k - 1] if k > 0 else cur[i, j, nth - 1]
                        vtp = cur[i, j, k + 1] if k < nth - 1 else cur[i, j, 0]

                        dmx = (v - vxm) / hx
                        dpx = (vxp - v) / hx
                        dmy = (v - vym) / hy
                        dpy = (vyp - v) / hy
                        dmt = (v - vtm) / hth
                        dpt = (vtp - v) / hth

                        px = 0.5 * (dmx + dpx)
                        py = 0.5 * (dmy + dpy)
                        pth = 0.5 * (dmt + dpt)
                        a = px * cos_t[k] + py * sin_t[k]
                        H = (min(v_min * a, v_max * a)
                             - omega_max * abs(pth)
                             + d_bar * math.hypot(px, py)
                             + d_theta_bar * abs(pth))
                        diss = 0.5 * (ax * (dpx - dmx) + ay * (dpy - dmy)
                                      + ath * (dpt - dmt))
                        out = v + dt * (H + diss)
                        if out > ell[i, j, k]:
                            out = ell[i, j, k]
                        if out < g[i, j, k]:
                            out = g[i, j, k]
                        nxt[i, j, k] = out
            cur, nxt = nxt, cur
        return cur

    def lf_advance_numba(V, ell, g, n_steps, dt, hx, hy, hth, cos_t, sin_t,
                         v_min, v_max, omega_max, d_bar, d_theta_bar):
        return _lf_advance_jit(
            np.ascontiguousarray(V, dtype=np.float64),
            np.ascontiguousarray(ell, dtype=np.float64),
            np.ascontiguousarray(g, dtype=np.float64),
            int(n_steps), float(dt), float(hx), float(hy), float(hth),
            np.ascontiguousarray(cos_t, dtype=np.float64),
            np.ascontiguousarray(sin_t, dtype=np.float64),
            float(v_min), float(v_max), float(omega_max),
            float(d_bar), float(d_theta_bar))

    @njit(cache=True)
    def _trilinear_jit(F, xq, yq, tq, x0, hx, y0, hy, th0, hth, out):
        nx, ny, nth = F.shape
        for n in range(xq.shape[0]):
            fx = (xq[n] - x0) / hx
            fy = (yq[n] - y0) / hy
            ft = (tq[n] - th0) / hth
            ix = int(math.floor(fx))
            iy = int(math.floor(fy))
            if ix < 0:
                ix = 0
            elif ix > nx - 2:
                ix = nx - 2
            if iy < 0:
                iy = 0
            elif iy > ny - 2:
                iy = ny - 2
            wx = fx - ix
            wy = fy - iy
            ft = ft % nth
            it = int(math.floor(ft)) % nth
            wt = ft - math.floor(ft)
            it1 = (it + 1) % nth

            c00 = F[ix, iy, it] * (1 - wx) + F[ix + 1, iy, it] * wx
            c10 = F[ix, iy + 1, it] * (1 - wx) + F[ix + 1, iy + 1, it] * wx
            c01 = F[ix, iy, it1] * (1 - wx) + F[ix + 1, iy, it1] * wx
            c11 = F[ix, iy + 1, it1] * (1 - wx) + F[ix + 1, iy + 1, it1] * wx
            c0 = c00 * (1 - wy) + c10 * wy
            c1 = c01 * (1 - wy) + c11 * wy
            out[n] = c0 * (1 - wt) + c1 * wt
        return out

    def trilinear_numba(F, xq, yq, tq, x0, hx, y0, hy, th0, hth):
        xa = np.atleast_1d(np.asarray(xq, dtype=np.float64)).ravel()
        ya = np.atleast_1d(np.asarray(yq, dtype=np.float64)).ravel()
        ta = np.atleast_1d(np.asarray(tq, dtype=np.float64)).ravel()
        out = np.empty(xa.shape[0], dtype=np.float64)
        _trilinear_jit(np.ascontiguousarray(F, dtype=np.float64),
                       xa, ya, ta, float(x0), float(hx), float(y0), float(hy),
                       float(th0), float(hth), out)
        return out.reshape(np.shape(xq)) if np.ndim(xq) else out[0]


if USE_NUMBA:
    lf_advance = lf_advance_numba
    trilinear = trilinear_numba
else:
    lf_advance = lf_advance_numpy

    def trilinear(F, xq, yq, tq, x0, hx, y0, hy, th0, hth):
        out = trilinear_numpy(F, xq, yq, tq, x0, hx, y0, hy, th0, hth)
        return float(out) if np.ndim(xq) == 0 else out
