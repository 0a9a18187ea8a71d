"""Certified reach-avoid set machinery.

Masks are raster set certificates: a node is in the epsilon-sublevel mask
iff its stored value is <= -epsilon. Thresholding happens on stored time
slices only (no time interpolation); value queries interpolate, masks do
not. The heading-agnostic collapse takes the pointwise minimum over the
theta column, certifying that some orientation is feasible at each planar
point.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import DomainError, Grid3, ValueField


class OutOfLocalFrame(DomainError):
    """Translated query left the anchor's local domain."""


@dataclass(frozen=True)
class Grid2:
    """Uniform 2D raster over (x, y) in the global frame."""

    bounds: tuple  # ((xmin, xmax), (ymin, ymax))
    dims: tuple

    @property
    def spacing(self):
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.dims))

    def axis(self, i):
        lo, _ = self.bounds[i]
        return lo + self.spacing[i] * np.arange(self.dims[i])

    def shifted(self, dx, dy):
        (x0, x1), (y0, y1) = self.bounds
        return Grid2(((x0 + dx, x1 + dx), (y0 + dy, y1 + dy)), self.dims)


@dataclass
class ReachMask3:
    grid: Grid3
    t: float
    epsilon: float
    mask: np.ndarray  # bool, grid dims

    def volume(self):
        return int(np.count_nonzero(self.mask))


@dataclass
class ReachMask2:
    grid: Grid2
    t: float
    epsilon: float
    mask: np.ndarray  # bool (nx, ny)


@dataclass(frozen=True)
class SafeSetAnchor:
    """Safe disk in the global frame with its local value-domain placement."""

    center: tuple
    radius: float
    half_width: float
    provider_id: str = ""

    def __post_init__(self):
        if self.radius <= 0 or self.half_width <= 0:
            raise ValueError("radius and half_width must be positive")
        if self.radius > self.half_width:
            raise ValueError("local domain must cover the safe disk")

    def to_local(self, x, y):
        return np.asarray(x) - self.center[0], np.asarray(y) - self.center[1]

    def in_local_domain(self, x, y):
        lx, ly = self.to_local(x, y)
        w = self.half_width
        return (np.abs(lx) <= w) & (np.abs(ly) <= w)

    def global_grid2(self, grid: Grid3) -> Grid2:
        (x0, x1), (y0, y1), _ = grid.bounds
        return Grid2(((x0 + self.center[0], x1 + self.center[0]),
                      (y0 + self.center[1], y1 + self.center[1])),
                     (grid.dims[0], grid.dims[1]))


def epsilon_sublevel(vf: ValueField, t: float, epsilon: float) -> ReachMask3:
    """Node-wise threshold of the stored slice nearest to horizon t."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    k = vf.slice_index(t, nearest=True)
    return ReachMask3(grid=vf.grid, t=float(vf.times[k]), epsilon=epsilon,
                      mask=vf.values[k] <= -epsilon)


def heading_agnostic(vf: ValueField, t: float, epsilon: float,
                     theta_indices=None) -> ReachMask2:
    """Threshold of the pointwise minimum over the theta column.

    ``theta_indices`` optionally restricts the heading set; default is the
    full grid column.
    """
    k = vf.slice_index(t, nearest=True)
    sl = vf.values[k]
    if theta_indices is not None:
        sl = sl[:, :, theta_indices]
    vbar = sl.min(axis=2)
    g2 = Grid2((vf.grid.bounds[0], vf.grid.bounds[1]),
               (vf.grid.dims[0], vf.grid.dims[1]))
    return ReachMask2(grid=g2, t=float(vf.times[k]), epsilon=epsilon,
                      mask=vbar <= -epsilon)


def translate_query(p_global, theta: float, t: float, anchor: SafeSetAnchor,
                    vf: ValueField) -> float:
    """Global-frame lookup by spatial translation into the anchor's local frame."""
    lx, ly = anchor.to_local(p_global[0], p_global[1])
    if not (abs(lx) <= anchor.half_width and abs(ly) <= anchor.half_width):
        raise OutOfLocalFrame(
            f"point {tuple(p_global)} outside local frame of anchor at "
            f"{anchor.center}")
    return float(vf.interpolate(float(lx), float(ly), theta, t))


def _resample_to(grid_src: Grid2, mask_src, grid_dst: Grid2):
    """Nearest-neighbor resample; cells outside the source raster are False."""
    xs = grid_dst.axis(0)
    ys = grid_dst.axis(1)
    hx, hy = grid_src.spacing
    ix = np.round((xs - grid_src.bounds[0][0]) / hx).astype(int)
    iy = np.round((ys - grid_src.bounds[1][0]) / hy).astype(int)
    okx = (ix >= 0) & (ix < grid_src.dims[0])
    oky = (iy >= 0) & (iy < grid_src.dims[1])
    out = np.zeros((len(xs), len(ys)), dtype=bool)
    sub = mask_src[np.clip(ix, 0, grid_src.dims[0] - 1)[:, None],
                   np.clip(iy, 0, grid_src.dims[1] - 1)[None, :]]
    out[np.ix_(okx, oky)] = sub[np.ix_(okx, oky)]
    return out


def overlap_check(a: ReachMask2, b: ReachMask2, delta: float):
    """Find a point whose closed delta-ball lies inside both masks.

    Masks are resampled onto a common raster over the intersection of
    their extents at the finer spacing (conservatively: a resampled cell
    is in only if its source cell is in). Returns the first witness in
    row-major scan order, or None.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    (ax0, ax1), (ay0, ay1) = a.grid.bounds
    (bx0, bx1), (by0, by1) = b.grid.bounds
    x0, x1 = max(ax0, bx0), min(ax1, bx1)
    y0, y1 = max(ay0, by0), min(ay1, by1)
    if x0 >= x1 or y0 >= y1:
        return None
    hx = min(a.grid.spacing[0], b.grid.spacing[0])
    hy = min(a.grid.spacing[1], b.grid.spacing[1])
    nx = int(np.floor((x1 - x0) / hx)) + 1
    ny = int(np.floor((y1 - y0) / hy)) + 1
    common = Grid2(((x0, x0 + (nx - 1) * hx), (y0, y0 + (ny - 1) * hy)), (nx, ny))
    both = (_resample_to(a.grid, a.mask, common)
            & _resample_to(b.grid, b.mask, common))
    if not both.any():
        return None
    # disk structuring element over cells whose centers lie within delta
    rx = int(np.floor(delta / hx))
    ry = int(np.floor(delta / hy))
    ox, oy = np.meshgrid(np.arange(-rx, rx + 1) * hx,
                         np.arange(-ry, ry + 1) * hy, indexing="ij")
    selem = ox**2 + oy**2 <= delta**2 + 1e-12
    ok = ndimage.binary_erosion(both, structure=selem, border_value=0)
    hits = np.argwhere(ok)
    if len(hits) == 0:
        return None
    i, j = hits[0]
    return (float(common.axis(0)[i]), float(common.axis(1)[j]))


def inclusion_volume(learned, truth):
    """eta = |learned AND truth| / |learned| over matched mask sequences.

    Accepts single masks or sequences; grids and horizons must match.
    Returns (eta, vacuous) where vacuous flags an empty learned set
    (reported as eta = 1).
    """
    if isinstance(learned, ReachMask3):
        learned, truth = [learned], [truth]
    if len(learned) != len(truth):
        raise ValueError("mask sequences must have equal length")
    n_learned = 0
    n_both = 0
    for lm, tm in zip(learned, truth):
        if lm.grid != tm.grid:
            raise ValueError("grid mismatch between learned and truth masks")
        if abs(lm.t - tm.t) > 1e-9:
            raise ValueError("horizon mismatch between learned and truth masks")
        n_learned += int(np.count_nonzero(lm.mask))
        n_both += int(np.count_nonzero(lm.mask & tm.mask))
    if n_learned == 0:
        return 1.0, True
    return n_both / n_learned, False


@dataclass
class FeasibleRegion:
    """Union of per-anchor heading-agnostic reach sets.

    Each entry carries the anchor, its 2D heading-agnostic value raster in
    the anchor's local frame, and the certificate mask derived from it.
    Membership interpolates the raster bilinearly and thresholds at
    -epsilon, short-circuiting across anchors; leaving every local frame
    means infeasible.
    """

    entries: list = field(default_factory=list)
    epsilon: float = 0.0

    @classmethod
    def from_fields(cls, anchors, fields, t: float, epsilon: float):
        """Build from matched (anchor, ValueField) lists at horizon t."""
        if len(anchors) == 0:
            raise ValueError("need at least one anchor")
        region = cls(entries=[], epsilon=epsilon)
        for anchor, vf in zip(anchors, fields):
            mask2 = heading_agnostic(vf, t, epsilon)
            k = vf.slice_index(t, nearest=True)
            vbar = vf.values[k].min(axis=2)
            g2 = mask2.grid
            region.entries.append({
                "anchor": anchor,
                "vbar": vbar,
                "local_grid": g2,
                "mask": ReachMask2(grid=g2.shifted(*anchor.center), t=mask2.t,
                                   epsilon=epsilon, mask=mask2.mask),
            })
        return region

    def _vbar_at(self, entry, x, y):
        lx, ly = entry["anchor"].to_local(x, y)
        g2 = entry["local_grid"]
        (x0, x1), (y0, y1) = g2.bounds
        if not (x0 <= lx <= x1 and y0 <= ly <= y1):
            return None
        hx, hy = g2.spacing
        fx = (lx - x0) / hx
        fy = (ly - y0) / hy
        i = min(int(fx), g2.dims[0] - 2)
        j = min(int(fy), g2.dims[1] - 2)
        wx, wy = fx - i, fy - j
        v = entry["vbar"]
        return ((v[i, j] * (1 - wx) + v[i + 1, j] * wx) * (1 - wy)
                + (v[i, j + 1] * (1 - wx) + v[i + 1, j + 1] * wx) * wy)

    def contains(self, x, y) -> bool:
        for entry in self.entries:
            val = self._vbar_at(entry, x, y)
            if val is not None and val <= -self.epsilon:
                return True
        return False

    def contains_batch(self, xs, ys) -> np.ndarray:
        """Vectorized union membership over point arrays."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        out = np.zeros(xs.shape, dtype=bool)
        for entry in self.entries:
            anchor = entry["anchor"]
            g2 = entry["local_grid"]
            (x0, x1), (y0, y1) = g2.bounds
            lx = xs - anchor.center[0]
            ly = ys - anchor.center[1]
            ok = (~out) & (lx >= x0) & (lx <= x1) & (ly >= y0) & (ly <= y1)
            if not ok.any():
                continue
            hx, hy = g2.spacing
            fx = (lx[ok] - x0) / hx
            fy = (ly[ok] - y0) / hy
            i = np.minimum(fx.astype(int), g2.dims[0] - 2)
            j = np.minimum(fy.astype(int), g2.dims[1] - 2)
            wx, wy = fx - i, fy - j
            v = entry["vbar"]
            val = ((v[i, j] * (1 - wx) + v[i + 1, j] * wx) * (1 - wy)
                   + (v[i, j + 1] * (1 - wx) + v[i + 1, j + 1] * wx) * wy)
            hit = np.zeros(xs.shape, dtype=bool)
            hit[ok] = val <= -self.epsilon
            out |= hit
        return out

    def value(self, x, y) -> float:
        """Min heading-agnostic value over anchors (inf outside all frames)."""
        best = np.inf
        for entry in self.entries:
            val = self._vbar_at(entry, x, y)
            if val is not None:
                best = min(best, val)
        return float(best)

    def masks(self):
        return [e["mask"] for e in self.entries]


def contains(region: FeasibleRegion, p) -> bool:
    return region.contains(p[0], p[1])


# ---------------------------------------------------------------------------
# mask export helpers
# ---------------------------------------------------------------------------

def mask_rle(mask) -> dict:
    """Row-major run-length encoding: leading value plus run lengths."""
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return {"shape": list(mask.shape), "first": False, "runs": []}
    edges = np.flatnonzero(np.diff(flat)) + 1
    splits = np.concatenate([[0], edges, [flat.size]])
    return {"shape": list(np.asarray(mask).shape),
            "first": bool(flat[0]),
            "runs": np.diff(splits).astype(int).tolist()}


def mask_from_rle(blob) -> np.ndarray:
    out = np.empty(int(np.prod(blob["shape"])), dtype=bool)
    val = blob["first"]
    pos = 0
    for run in blob["runs"]:
        out[pos:pos + run] = val
        pos += run
        val = not val
    return out.reshape(blob["shape"])


def mask_to_pgm(mask) -> bytes:
    """Binary portable graymap (P5) of a 2D mask slice, for eyeballing."""
    arr = (np.asarray(mask, dtype=np.uint8).T[::-1] * 255).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode()
    return header + arr.tobytes()
