"""Dataset loading from the solver's on-disk interfaces.

The trainer reads only external formats: the dataset ``index.json`` plus
HJVF value-field files (see the main package docs). Each training item is
one 2D slice: the obstacle field channel plus a (theta, t) hyperparameter
pair, targeting the matching value slice.
"""

import json
import os
import struct

import numpy as np

HJVF_MAGIC = b"HJVF"


def read_hjvf(path):
    """Minimal HJVF reader: returns (values[t, x, y, th], meta dict)."""
    with open(path, "rb") as f:
        if f.read(4) != HJVF_MAGIC:
            raise ValueError(f"{path}: not an HJVF file")
        (version,) = struct.unpack("<I", f.read(4))
        if version != 1:
            raise ValueError(f"{path}: unsupported HJVF version {version}")
        nx, ny, nth = struct.unpack("<3I", f.read(12))
        bounds = struct.unpack("<6d", f.read(48))
        periodic = struct.unpack("<3B", f.read(3))
        (n_slices,) = struct.unpack("<I", f.read(4))
        (dt_out,) = struct.unpack("<d", f.read(8))
        count = n_slices * nx * ny * nth
        buf = f.read(4 * count)
        if len(buf) != 4 * count:
            raise ValueError(f"{path}: truncated HJVF payload")
    data = np.frombuffer(buf, dtype="<f4").reshape(n_slices, nth, ny, nx)
    meta = {"dims": (nx, ny, nth), "bounds": bounds,
            "periodic": periodic, "dt_out": dt_out, "n_slices": n_slices}
    return data.transpose(0, 3, 2, 1).astype(np.float32), meta


def theta_axis(meta):
    nth = meta["dims"][2]
    lo, hi = meta["bounds"][4], meta["bounds"][5]
    return lo + (hi - lo) / nth * np.arange(nth)


class SliceDataset:
    """2D training slices drawn from every sample of a dataset directory."""

    def __init__(self, dataset_dir, slices_per_sample=8, seed=0,
                 test_fraction=0.2):
        with open(os.path.join(dataset_dir, "index.json")) as f:
            self.index = json.load(f)
        self.horizon = float(self.index["horizon"])
        rng = np.random.default_rng(seed)
        items = []
        for sample in self.index["samples"]:
            g_field, g_meta = read_hjvf(os.path.join(dataset_dir, sample["g"]))
            v_field, v_meta = read_hjvf(os.path.join(dataset_dir,
                                                     sample["value"]))
            thetas = theta_axis(v_meta)
            times = v_meta["dt_out"] * np.arange(v_meta["n_slices"])
            g2d = g_field[0, :, :, 0]
            n_th, n_t = len(thetas), len(times)
            pairs = rng.choice(n_th * n_t, size=min(slices_per_sample,
                                                    n_th * n_t),
                               replace=False)
            for flat in pairs:
                ki, ti = int(flat % n_th), int(flat // n_th)
                items.append((g2d, float(thetas[ki]), float(times[ti]),
                              v_field[ti, :, :, ki]))
        rng.shuffle(items)
        n_test = max(1, int(round(test_fraction * len(items))))
        self.test_items = items[:n_test]
        self.train_items = items[n_test:]

    def batches(self, rng, batch_size):
        order = rng.permutation(len(self.train_items))
        for lo in range(0, len(order), batch_size):
            sel = order[lo:lo + batch_size]
            yield [self.train_items[i] for i in sel]
