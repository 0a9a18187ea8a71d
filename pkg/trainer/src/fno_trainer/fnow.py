"""FNOW export/import per docs/fnow_format.md (bit-exact round trip)."""

import struct

import numpy as np
import torch

FNOW_MAGIC = b"FNOW"
FNOW_VERSION = 1


def export_weights(model, path):
    d_v, d_a = model.lift_w.shape
    k1 = model.layers[0].k1
    k2 = model.layers[0].k2
    with open(path, "wb") as f:
        f.write(FNOW_MAGIC)
        f.write(struct.pack("<I", FNOW_VERSION))
        f.write(struct.pack("<6I", len(model.layers), d_v, d_a, 1, k1, k2))

        def arr(t):
            f.write(np.ascontiguousarray(
                t.detach().cpu().numpy(), dtype="<f4").tobytes())

        arr(model.lift_w)
        arr(model.lift_b)
        for layer in model.layers:
            arr(layer.w)
            arr(layer.b)
            arr(layer.r_re)
            arr(layer.r_im)
        arr(model.proj_w)
        arr(model.proj_b)


def import_weights(model, path):
    """Load an FNOW file into a matching model (shapes must agree)."""
    with open(path, "rb") as f:
        if f.read(4) != FNOW_MAGIC:
            raise ValueError("bad FNOW magic")
        (version,) = struct.unpack("<I", f.read(4))
        if version != FNOW_VERSION:
            raise ValueError(f"unsupported FNOW version {version}")
        n_layers, d_v, d_a, d_y, k1, k2 = struct.unpack("<6I", f.read(24))
        if n_layers != len(model.layers) or (d_v, d_a) != tuple(model.lift_w.shape):
            raise ValueError("FNOW shapes do not match the model")

        def arr(shape):
            count = int(np.prod(shape))
            buf = f.read(4 * count)
            if len(buf) != 4 * count:
                raise ValueError("truncated FNOW file")
            return torch.from_numpy(
                np.frombuffer(buf, dtype="<f4").reshape(shape).copy())

        with torch.no_grad():
            model.lift_w.copy_(arr((d_v, d_a)))
            model.lift_b.copy_(arr((d_v,)))
            for layer in model.layers:
                layer.w.copy_(arr((d_v, d_v)))
                layer.b.copy_(arr((d_v,)))
                layer.r_re.copy_(arr((k1, k2, d_v, d_v)))
                layer.r_im.copy_(arr((k1, k2, d_v, d_v)))
            model.proj_w.copy_(arr((d_y, d_v)))
            model.proj_b.copy_(arr((d_y,)))
    return model
