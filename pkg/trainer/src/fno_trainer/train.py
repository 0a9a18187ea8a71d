"""Training loop with checkpoint metrics and parity export."""

import json
import os

import numpy as np
import torch

from .data import SliceDataset
from .fnow import export_weights
from .model import ReachOperator, mixed_loss

DEFAULTS = {
    "n_layers": 4,
    "d_v": 64,
    "modes": [12, 12],
    "epochs": 200,
    "checkpoints": [50, 100, 150, 200],
    "batch_size": 16,
    "lr": 1e-3,
    "lam": 0.5,
    "slices_per_sample": 8,
    "seed": 0,
    "test_fraction": 0.2,
}


def _to_batch(items):
    g = torch.from_numpy(np.stack([it[0] for it in items]))
    theta = torch.tensor([it[1] for it in items], dtype=torch.float32)
    t = torch.tensor([it[2] for it in items], dtype=torch.float32)
    target = torch.from_numpy(np.stack([it[3] for it in items]))
    return g, theta, t, target


def evaluate(model, items, cell_area):
    """Test-set sup error and the scaled Sobolev-style error.

    epsilon0 here is the 2D-slice analogue: sqrt of the cell-weighted sum
    of squared value error plus squared spatial-gradient error, aggregated
    over the held-out slices.
    """
    model.eval()
    sup = 0.0
    sq_val = 0.0
    sq_grad = 0.0
    with torch.no_grad():
        for lo in range(0, len(items), 32):
            g, theta, t, target = _to_batch(items[lo:lo + 32])
            pred = model(g, theta, t)
            err = (pred - target).numpy()
            sup = max(sup, float(np.abs(err).max()))
            gx, gy = np.gradient(err, axis=(1, 2))
            sq_val += float(np.sum(err ** 2)) * cell_area
            sq_grad += float(np.sum(gx ** 2 + gy ** 2)) * cell_area
    model.train()
    return sup, float(np.sqrt(sq_val + sq_grad))


def train(dataset_dir, out_dir, config=None):
    cfg = {**DEFAULTS, **(config or {})}
    os.makedirs(out_dir, exist_ok=True)
    torch.manual_seed(cfg["seed"])
    data = SliceDataset(dataset_dir,
                        slices_per_sample=int(cfg["slices_per_sample"]),
                        seed=cfg["seed"],
                        test_fraction=cfg["test_fraction"])
    sample_g = data.train_items[0][0]
    nx, ny = sample_g.shape
    cell_area = (20.0 / (nx - 1)) * (20.0 / (ny - 1))
    model = ReachOperator(n_layers=int(cfg["n_layers"]), d_v=int(cfg["d_v"]),
                          modes=tuple(cfg["modes"]), horizon=data.horizon)
    opt = torch.optim.Adam(model.parameters(), lr=float(cfg["lr"]))
    rng = np.random.default_rng(cfg["seed"])

    history = []
    train_probe = data.train_items[:200]
    sup0, eps0_0 = evaluate(model, data.test_items, cell_area)
    tr_sup0, tr_eps0 = evaluate(model, train_probe, cell_area)
    history.append({"epoch": 0, "loss": None, "epsilon": sup0,
                    "epsilon0": eps0_0, "train_epsilon": tr_sup0,
                    "train_epsilon0": tr_eps0})
    checkpoints = set(int(c) for c in cfg["checkpoints"])
    for epoch in range(1, int(cfg["epochs"]) + 1):
        losses = []
        for items in data.batches(rng, int(cfg["batch_size"])):
            g, theta, t, target = _to_batch(items)
            opt.zero_grad()
            loss = mixed_loss(model(g, theta, t), target, lam=float(cfg["lam"]))
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        record = {"epoch": epoch, "loss": float(np.mean(losses))}
        if epoch in checkpoints or epoch == int(cfg["epochs"]):
            sup, e0 = evaluate(model, data.test_items, cell_area)
            tr_sup, tr_e0 = evaluate(model, train_probe, cell_area)
            record.update({"epsilon": sup, "epsilon0": e0,
                           "train_epsilon": tr_sup, "train_epsilon0": tr_e0})
        history.append(record)

    weights_path = os.path.join(out_dir, "weights.fnow")
    export_weights(model, weights_path)
    parity = export_parity(model, data, out_dir)
    metrics_path = os.path.join(out_dir, "metrics.json")
    with open(metrics_path, "w") as f:
        json.dump({"config": cfg, "history": history, "parity": parity},
                  f, indent=2, sort_keys=True)
        f.write("\n")
    return {"weights": weights_path, "metrics": metrics_path,
            "history": history}


def export_parity(model, data, out_dir, theta=0.5, t=None):
    """Dump one pinned forward pass for cross-implementation checks."""
    t = data.horizon / 2 if t is None else t
    g2d = data.test_items[0][0]
    model.eval()
    with torch.no_grad():
        out = model(torch.from_numpy(g2d[None]),
                    torch.tensor([theta], dtype=torch.float32),
                    torch.tensor([t], dtype=torch.float32))[0].numpy()
    g_path = os.path.join(out_dir, "parity_g.f32")
    out_path = os.path.join(out_dir, "parity_out.f32")
    np.ascontiguousarray(g2d, dtype="<f4").tofile(g_path)
    np.ascontiguousarray(out, dtype="<f4").tofile(out_path)
    meta = {"shape": list(g2d.shape), "theta": theta, "t": t,
            "horizon": data.horizon, "g": "parity_g.f32",
            "out": "parity_out.f32", "weights": "weights.fnow"}
    with open(os.path.join(out_dir, "parity.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return meta
