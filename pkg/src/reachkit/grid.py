"""Gridded fields over the (x, y, theta) state space.

``Grid3`` is a uniform rectilinear grid, periodic in theta. ``ScalarField``
holds one value per node; ``ValueField`` stacks time slices of a value
function indexed by *remaining horizon* (slice 0 is horizon 0, i.e. the
terminal condition; later slices are larger horizons).

The on-disk value-field format ("HJVF") is:

    magic b"HJVF" | version u32 | dims 3*u32 | bounds 6*f64 |
    periodic 3*u8 | slice count u32 | dt_out f64 |
    slices f32, ordered time slowest, then theta, then y, then x fastest

All integers/floats little-endian. Writers and readers round-trip
bit-exactly.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels

HJVF_MAGIC = b"HJVF"
HJVF_VERSION = 1

TWO_PI = 2.0 * np.pi


class DomainError(ValueError):
    """Query outside the grid's spatial or temporal domain."""


class FormatError(ValueError):
    """Malformed binary artifact (bad magic/version or truncation)."""


def wrap_angle(theta):
    """Wrap an angle (or array) to [-pi, pi)."""
    return np.mod(np.asarray(theta) + np.pi, TWO_PI) - np.pi


@dataclass(frozen=True)
class Grid3:
    """Uniform grid over (x, y, theta); theta periodic on exactly (-pi, pi)."""

    bounds: tuple = ((-10.0, 10.0), (-10.0, 10.0), (-np.pi, np.pi))
    dims: tuple = (50, 50, 25)
    periodic: tuple = (False, False, True)

    def __post_init__(self):
        if len(self.bounds) != 3 or len(self.dims) != 3 or len(self.periodic) != 3:
            raise ValueError("Grid3 needs three axes")
        for (lo, hi), n in zip(self.bounds, self.dims):
            if n < 3:
                raise ValueError("need at least 3 nodes per axis")
            if not hi > lo:
                raise ValueError("bounds must be increasing")
        if self.periodic[0] or self.periodic[1]:
            raise ValueError("x/y axes are not periodic")
        if self.periodic[2]:
            lo, hi = self.bounds[2]
            if not (np.isclose(lo, -np.pi) and np.isclose(hi, np.pi)):
                raise ValueError("periodic theta axis must span exactly (-pi, pi)")

    @property
    def spacing(self):
        out = []
        for (lo, hi), n, per in zip(self.bounds, self.dims, self.periodic):
            out.append((hi - lo) / (n if per else n - 1))
        return tuple(out)

    def axis(self, i):
        """Node coordinates along axis i (periodic axis excludes the endpoint)."""
        lo, _ = self.bounds[i]
        h = self.spacing[i]
        return lo + h * np.arange(self.dims[i])

    def meshes(self):
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij")

    def contains_xy(self, x, y):
        (x0, x1), (y0, y1), _ = self.bounds
        return (x0 <= x) & (x <= x1) & (y0 <= y) & (y <= y1)

    def diagonal(self):
        (x0, x1), (y0, y1), _ = self.bounds
        return float(np.hypot(x1 - x0, y1 - y0))


@dataclass
class ScalarField:
    grid: Grid3
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != tuple(self.grid.dims):
            raise ValueError(f"data shape {self.data.shape} != grid dims {self.grid.dims}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains non-finite values")

    def __call__(self, x, y, theta):
        """Trilinear evaluation; raises DomainError outside x/y bounds."""
        if not np.all(self.grid.contains_xy(x, y)):
            raise DomainError(f"query ({x}, {y}) outside grid bounds")
        g = self.grid
        hx, hy, hth = g.spacing
        return _kernels.trilinear(self.data, x, y, theta,
                                  g.bounds[0][0], hx, g.bounds[1][0], hy,
                                  g.bounds[2][0], hth)


@dataclass
class ValueField:
    """Value function slices over remaining horizon, nondecreasing times."""

    grid: Grid3
    times: np.ndarray
    values: np.ndarray  # (n_times, nx, ny, ntheta)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.times),) + tuple(self.grid.dims):
            raise ValueError("slice stack does not match grid/time dimensions")
        if len(self.times) < 1 or self.times[0] != 0.0:
            raise ValueError("times must start at horizon 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def horizon(self):
        return float(self.times[-1])

    def slice_index(self, t, nearest=False):
        """Index of the stored slice at horizon t (or nearest if requested)."""
        if not (0.0 <= t <= self.horizon + 1e-12):
            raise DomainError(f"horizon {t} outside [0, {self.horizon}]")
        idx = np.searchsorted(self.times, t)
        if idx < len(self.times) and abs(self.times[idx] - t) < 1e-9:
            return int(idx)
        if nearest:
            k = int(np.argmin(np.abs(self.times - t)))
            return k
        raise DomainError(f"horizon {t} is not a stored slice")

    def _bracket(self, t):
        if not (0.0 <= t <= self.horizon + 1e-9):
            raise DomainError(f"horizon {t} outside [0, {self.horizon}]")
        t = min(max(t, 0.0), self.horizon)
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self.times) - 2) if len(self.times) > 1 else 0
        if len(self.times) == 1:
            return 0, 0, 0.0
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return k, k + 1, float(w)

    def _interp_slice(self, k, x, y, theta):
        g = self.grid
        hx, hy, hth = g.spacing
        return _kernels.trilinear(self.values[k], x, y, theta,
                                  g.bounds[0][0], hx, g.bounds[1][0], hy,
                                  g.bounds[2][0], hth)

    def interpolate(self, x, y, theta, t):
        """Trilinear in space (periodic theta), linear in horizon."""
        if not np.all(self.grid.contains_xy(x, y)):
            raise DomainError(f"query ({x}, {y}) outside grid bounds")
        k0, k1, w = self._bracket(t)
        v0 = self._interp_slice(k0, x, y, theta)
        if k1 == k0 or w == 0.0:
            return v0
        v1 = self._interp_slice(k1, x, y, theta)
        return v0 * (1.0 - w) + v1 * w

    def gradient(self, x, y, theta, t):
        """Spatial gradient by central differences of the interpolated field.

        Steps are one grid spacing per axis, falling back to one-sided at
        the x/y walls; theta wraps.
        """
        g = self.grid
        hx, hy, hth = g.spacing
        (x0, x1), (y0, y1), _ = g.bounds

        def d_axis(lo, hi, h, coord, eval_at):
            up = coord + h
            dn = coord - h
            if up > hi:
                return (eval_at(coord) - eval_at(dn)) / h
            if dn < lo:
                return (eval_at(up) - eval_at(coord)) / h
            return (eval_at(up) - eval_at(dn)) / (2.0 * h)

        px = d_axis(x0, x1, hx, x, lambda c: self.interpolate(c, y, theta, t))
        py = d_axis(y0, y1, hy, y, lambda c: self.interpolate(x, c, theta, t))
        pth = (self.interpolate(x, y, theta + hth, t)
               - self.interpolate(x, y, theta - hth, t)) / (2.0 * hth)
        return np.array([px, py, pth])

    def time_derivative(self, x, y, theta, t):
        """d/dt of the interpolated value over stored-slice spacing."""
        if len(self.times) == 1:
            return 0.0
        k = min(max(int(np.searchsorted(self.times, t, side="right")) - 1, 0),
                len(self.times) - 2)
        dt = self.times[k + 1] - self.times[k]
        up = min(t + dt, self.horizon)
        dn = max(t - dt, 0.0)
        return (self.interpolate(x, y, theta, up)
                - self.interpolate(x, y, theta, dn)) / (up - dn)


# ---------------------------------------------------------------------------
# HJVF binary IO
# ---------------------------------------------------------------------------

def write_hjvf(vf: ValueField, path):
    dts = np.diff(vf.times)
    if len(dts) and not np.allclose(dts, dts[0], rtol=0, atol=1e-12):
        raise ValueError("HJVF requires uniformly spaced slices")
    dt_out = float(dts[0]) if len(dts) else 0.0
    g = vf.grid
    with open(path, "wb") as f:
        f.write(HJVF_MAGIC)
        f.write(struct.pack("<I", HJVF_VERSION))
        f.write(struct.pack("<3I", *g.dims))
        flat_bounds = [b for ax in g.bounds for b in ax]
        f.write(struct.pack("<6d", *flat_bounds))
        f.write(struct.pack("<3B", *(int(p) for p in g.periodic)))
        f.write(struct.pack("<I", len(vf.times)))
        f.write(struct.pack("<d", dt_out))
        # file order: time slowest, then theta, then y, then x fastest
        arr = np.ascontiguousarray(vf.values.transpose(0, 3, 2, 1), dtype="<f4")
        f.write(arr.tobytes())


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated HJVF file: missing {what}")
    return buf


def read_hjvf(path) -> ValueField:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != HJVF_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {HJVF_MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != HJVF_VERSION:
            raise FormatError(f"unsupported HJVF version {version}")
        dims = struct.unpack("<3I", _read_exact(f, 12, "dims"))
        raw_bounds = struct.unpack("<6d", _read_exact(f, 48, "bounds"))
        periodic = tuple(bool(b) for b in struct.unpack("<3B", _read_exact(f, 3, "periodic flags")))
        (n_slices,) = struct.unpack("<I", _read_exact(f, 4, "slice count"))
        (dt_out,) = struct.unpack("<d", _read_exact(f, 8, "dt_out"))
        count = n_slices * dims[0] * dims[1] * dims[2]
        buf = _read_exact(f, 4 * count, "slice data")
        if f.read(1):
            raise FormatError("trailing bytes after slice data")
    data = np.frombuffer(buf, dtype="<f4").reshape(n_slices, dims[2], dims[1], dims[0])
    grid = Grid3(bounds=((raw_bounds[0], raw_bounds[1]),
                         (raw_bounds[2], raw_bounds[3]),
                         (raw_bounds[4], raw_bounds[5])),
                 dims=tuple(int(d) for d in dims), periodic=periodic)
    times = dt_out * np.arange(n_slices) if n_slices > 1 else np.zeros(1)
    return ValueField(grid=grid, times=times,
                      values=data.transpose(0, 3, 2, 1).astype(np.float64))
