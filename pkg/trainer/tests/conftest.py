import json
import struct
from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]


def write_hjvf(path, values, bounds, dt_out):
    """Writer mirroring the external HJVF format (tests only)."""
    n_slices, nx, ny, nth = values.shape
    with open(path, "wb") as f:
        f.write(b"HJVF")
        f.write(struct.pack("<I", 1))
        f.write(struct.pack("<3I", nx, ny, nth))
        f.write(struct.pack("<6d", *bounds))
        f.write(struct.pack("<3B", 0, 0, 1))
        f.write(struct.pack("<I", n_slices))
        f.write(struct.pack("<d", dt_out))
        f.write(np.ascontiguousarray(values.transpose(0, 3, 2, 1),
                                     dtype="<f4").tobytes())


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    """Tiny synthetic dataset in the external on-disk layout.

    Value fields are smooth analytic stand-ins (signed distance shrunk per
    horizon step), enough to exercise loading, training, and export paths
    without running the PDE solver.
    """
    root = tmp_path_factory.mktemp("dataset")
    rng = np.random.default_rng(0)
    nx = ny = 32
    nth = 5
    n_t = 5
    dt_out = 0.5
    bounds = (-10.0, 10.0, -10.0, 10.0, -np.pi, np.pi)
    xs = np.linspace(-10, 10, nx)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    index = {"dataset_version": 1, "grid_dims": [nx, ny, nth],
             "horizon": dt_out * (n_t - 1), "dt_out": dt_out, "seed": 0,
             "target_radius": 1.0, "bounds": {}, "samples": []}
    for i in range(4):
        center = rng.uniform(-5, 5, 2)
        radius = rng.uniform(0.5, 2.0)
        g2d = radius - np.hypot(X - center[0], Y - center[1])
        vals = np.empty((n_t, nx, ny, nth), dtype=np.float32)
        base = np.hypot(X, Y) - 1.0
        for ti in range(n_t):
            shrink = base - 0.9 * dt_out * ti
            vals[ti] = np.maximum(shrink, g2d)[:, :, None]
        sdir = root / f"sample_{i:03d}"
        sdir.mkdir()
        write_hjvf(sdir / "g.hjvf", g2d[None, :, :, None].repeat(nth, axis=3),
                   bounds, 0.0)
        write_hjvf(sdir / "value.hjvf", vals, bounds, dt_out)
        index["samples"].append({
            "dir": f"sample_{i:03d}",
            "obstacle": {"center": center.tolist(), "radius": float(radius)},
            "g": f"sample_{i:03d}/g.hjvf",
            "value": f"sample_{i:03d}/value.hjvf",
        })
    (root / "index.json").write_text(json.dumps(index))
    return str(root)
