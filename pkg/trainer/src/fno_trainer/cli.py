"""fno-train command line: train on a dataset directory, or export a
random-initialized parity bundle for cross-implementation checks."""

import argparse
import json
import sys

import torch

from .data import SliceDataset
from .fnow import export_weights
from .model import ReachOperator
from .train import export_parity, train


def main(argv=None):
    parser = argparse.ArgumentParser(prog="fno-train")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and export FNOW + parity dump")
    p.add_argument("dataset", help="gen-dataset output directory")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config path")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("export-parity",
                       help="random-init model, export weights + parity dump")
    p.add_argument("dataset", help="gen-dataset output directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-v", type=int, default=16)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--layers", type=int, default=4)

    args = parser.parse_args(argv)
    if args.command == "train":
        cfg = {}
        if args.config:
            with open(args.config) as f:
                cfg = json.load(f)
        if args.epochs is not None:
            cfg["epochs"] = args.epochs
        if args.seed is not None:
            cfg["seed"] = args.seed
        result = train(args.dataset, args.out, cfg)
        last = [h for h in result["history"] if "epsilon" in h][-1]
        print(f"train: epsilon={last['epsilon']:.4g} "
              f"epsilon0={last['epsilon0']:.4g} -> {result['weights']}")
        return 0
    if args.command == "export-parity":
        import os
        torch.manual_seed(args.seed)
        data = SliceDataset(args.dataset, slices_per_sample=2, seed=args.seed)
        model = ReachOperator(n_layers=args.layers, d_v=args.d_v,
                              modes=(args.modes, args.modes),
                              horizon=data.horizon)
        os.makedirs(args.out, exist_ok=True)
        export_weights(model, os.path.join(args.out, "weights.fnow"))
        export_parity(model, data, args.out)
        print(f"export-parity: wrote weights + dump under {args.out}")
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
