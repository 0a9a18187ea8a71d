"""Batch command-line surface.

Subcommands: solve, gen-dataset, certify, plan, contingency-eval,
route-eval, plot. Configs are JSON; ``--set a.b=value`` overrides dotted
keys (values parsed as JSON scalars when possible), ``--seed`` overrides
the config/scenario seed everywhere. Outputs land under ``--out`` or
``$REACHKIT_OUT/<command>``; every output directory gets a manifest with
input/output hashes. Exit code 0 means no errors (and PASS for certify).
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .dynamics import Bounds
from .evals import ContingencyRow, RouteRow, contingency_suite, route_suite, \
    write_csv
from .fno import load_weights
from .grid import Grid3, ValueField, read_hjvf, write_hjvf
from .levelset import Disk, sdf_obstacles, sdf_target, solve_hji_vi
from .manifest import write_manifest
from .scenario import Scenario, ScenarioError
from .sim import TRACE_COLUMNS, run_mission, trace_to_csv
from .surrogate import PerturbedOracle, TrainedOperator, certify
from .svg import trace_svg

DEFAULT_MAP = Path(__file__).parent / "data" / "reference_map.json"


def _load_config(path, overrides, seed=None):
    with open(path) as f:
        cfg = json.load(f)
    for item in overrides or []:
        key, _, raw = item.partition("=")
        if not _:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def _out_dir(args, command):
    root = args.out or os.path.join(os.environ.get("REACHKIT_OUT", "."),
                                    command)
    os.makedirs(root, exist_ok=True)
    return root


def _grid_from(cfg):
    return Grid3(dims=tuple(cfg.get("grid_dims", (50, 50, 25))))


def _bounds_from(cfg):
    return Bounds(**cfg.get("bounds", {}))


def _disks_from(cfg):
    return [Disk(center=tuple(o["center"]), radius=float(o["radius"]))
            for o in cfg.get("obstacles", [])]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(args):
    cfg = _load_config(args.config, args.set, args.seed)
    out = _out_dir(args, "solve")
    grid = _grid_from(cfg)
    bounds = _bounds_from(cfg)
    ell = sdf_target(grid, float(cfg.get("target_radius", 1.0)))
    g = sdf_obstacles(grid, _disks_from(cfg))
    vf = solve_hji_vi(grid, ell, g, bounds, float(cfg.get("horizon", 8.0)),
                      float(cfg.get("dt_out", 0.25)),
                      dt_internal=cfg.get("dt_internal"))
    path = os.path.join(out, "value.hjvf")
    write_hjvf(vf, path)
    write_manifest(out, "solve", args.config, cfg.get("seed"),
                   inputs=[args.config], outputs=[path])
    print(f"solve: wrote {path} ({vf.values.shape[0]} slices)")
    return 0


def cmd_gen_dataset(args):
    cfg = _load_config(args.config, args.set, args.seed)
    out = _out_dir(args, "gen-dataset")
    grid = _grid_from(cfg)
    bounds = _bounds_from(cfg)
    n = int(cfg.get("n_samples", 10))
    seed = int(cfg.get("seed", 0))
    radius_range = cfg.get("radius_range", (0.5, 2.0))
    target_radius = float(cfg.get("target_radius", 1.0))
    horizon = float(cfg.get("horizon", 8.0))
    dt_out = float(cfg.get("dt_out", 0.25))
    (x0, x1), (y0, y1), _ = grid.bounds
    rng = np.random.default_rng(seed)
    ell = sdf_target(grid, target_radius)
    index = {"dataset_version": 1, "grid_dims": list(grid.dims),
             "horizon": horizon, "dt_out": dt_out, "seed": seed,
             "target_radius": target_radius,
             "bounds": cfg.get("bounds", {}), "samples": []}
    outputs = []
    for i in range(n):
        while True:
            center = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
            radius = float(rng.uniform(*radius_range))
            if np.hypot(*center) > radius + target_radius:
                break
        disk = Disk(center=center, radius=radius)
        g = sdf_obstacles(grid, [disk])
        vf = solve_hji_vi(grid, ell, g, bounds, horizon, dt_out)
        sample_dir = os.path.join(out, f"sample_{i:03d}")
        os.makedirs(sample_dir, exist_ok=True)
        g_path = os.path.join(sample_dir, "g.hjvf")
        v_path = os.path.join(sample_dir, "value.hjvf")
        write_hjvf(ValueField(grid=grid, times=np.zeros(1),
                              values=g.data[None]), g_path)
        write_hjvf(vf, v_path)
        outputs += [g_path, v_path]
        index["samples"].append({
            "dir": f"sample_{i:03d}",
            "obstacle": {"center": list(center), "radius": radius},
            "g": f"sample_{i:03d}/g.hjvf",
            "value": f"sample_{i:03d}/value.hjvf",
        })
    index_path = os.path.join(out, "index.json")
    with open(index_path, "w") as f:
        json.dump(index, f, indent=2, sort_keys=True)
        f.write("\n")
    write_manifest(out, "gen-dataset", args.config, seed,
                   inputs=[args.config], outputs=[index_path] + outputs)
    print(f"gen-dataset: wrote {n} samples under {out}")
    return 0


def load_dataset(dataset_dir):
    """Read an index.json dataset into (obstacles, oracle field) pairs."""
    index_path = os.path.join(dataset_dir, "index.json")
    with open(index_path) as f:
        index = json.load(f)
    scenarios = []
    for sample in index["samples"]:
        obs = sample.get("obstacle")
        disks = [Disk(center=tuple(obs["center"]), radius=float(obs["radius"]))] \
            if obs else []
        vf = read_hjvf(os.path.join(dataset_dir, sample["value"]))
        scenarios.append((disks, vf))
    return index, scenarios


def cmd_certify(args):
    cfg = _load_config(args.config, args.set, args.seed)
    out = _out_dir(args, "certify")
    index, scenarios = load_dataset(args.dataset)
    bounds = Bounds(**index.get("bounds", {}))
    backend_cfg = cfg.get("backend", {"kind": "perturbed", "eps_inj": 0.3})
    kind = backend_cfg.get("kind", "perturbed")
    if kind in ("perturbed", "oracle"):
        eps = 0.0 if kind == "oracle" else float(backend_cfg.get("eps_inj", 0.3))
        backend = PerturbedOracle(solver=None, eps_inj=eps,
                                  seed=int(backend_cfg.get("noise_seed",
                                                           cfg.get("seed", 0))),
                                  name=kind)
        for disks, vf in scenarios:
            backend.seed_oracle(disks, vf)
    elif kind == "fno":
        weights = load_weights(backend_cfg["weights"])
        ref = scenarios[0][1]
        backend = TrainedOperator(weights=weights, grid=ref.grid,
                                  times=ref.times)
    else:
        raise SystemExit(f"unknown backend kind {kind!r}")
    report = certify(backend, scenarios, bounds,
                     alpha0=float(cfg.get("alpha0", 0.03)),
                     epsilon_for_eta=cfg.get("epsilon_for_eta"))
    report_path = os.path.join(out, "certification.json")
    if args.dump_masks:
        from .reachsets import heading_agnostic, mask_rle
        blob = json.loads(report.to_json())
        masks = []
        for i, (disks, truth) in enumerate(scenarios):
            approx = backend.value_field(disks)
            t_end = float(truth.times[-1])
            masks.append({
                "scenario": i,
                "t": t_end,
                "learned_eps": mask_rle(
                    heading_agnostic(approx, t_end, report.epsilon).mask),
                "truth_zero": mask_rle(
                    heading_agnostic(truth, t_end, 0.0).mask),
            })
        blob["masks"] = masks
        with open(report_path, "w") as f:
            json.dump(blob, f, indent=2, sort_keys=True)
            f.write("\n")
    else:
        report.to_json(report_path)
    csv_path = os.path.join(out, "per_scenario.csv")
    write_csv(csv_path, ["scenario", "epsilon", "epsilon0", "rho",
                         "n_obstacles"],
              [[str(i), f"{r['epsilon']:.6g}", f"{r['epsilon0']:.6g}",
                f"{r['rho']:.6g}", str(r["n_obstacles"])]
               for i, r in enumerate(report.per_scenario)])
    write_manifest(out, "certify", args.config, cfg.get("seed"),
                   inputs=[args.config,
                           os.path.join(args.dataset, "index.json")],
                   outputs=[report_path, csv_path])
    status = "PASS" if report.passed else "FAIL"
    print(f"certify: {status} epsilon={report.epsilon:.4g} "
          f"epsilon0={report.epsilon0:.4g} eta(eps)={report.eta_include_eps:.4f} "
          f"eta(0)={report.eta_include_zero:.4f} "
          f"violation_bound={report.violation_bound:.4g}")
    return 0 if report.passed else 2


def cmd_plan(args):
    overrides = args.set
    sc = Scenario.from_json(args.scenario)
    if overrides:
        blob = json.loads(sc.to_json())
        for item in overrides:
            key, _, raw = item.partition("=")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = blob
            parts = key.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        sc = Scenario.from_json(blob)
    if args.seed is not None:
        sc.seed = args.seed
    out = _out_dir(args, "plan")
    try:
        metrics, trace = run_mission(sc)
    except ScenarioError as exc:
        print(f"plan: scenario invalid:\n{exc}", file=sys.stderr)
        return 1
    metrics_path = os.path.join(out, "metrics.json")
    with open(metrics_path, "w") as f:
        json.dump(metrics.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    trace_path = os.path.join(out, "trace.csv")
    trace_to_csv(trace, trace_path)
    svg_path = os.path.join(out, "trace.svg")
    with open(svg_path, "w") as f:
        f.write(trace_svg(trace, sc))
    write_manifest(out, "plan", args.scenario, sc.seed,
                   inputs=[args.scenario],
                   outputs=[metrics_path, trace_path, svg_path])
    print(f"plan: success={metrics.success} distance={metrics.distance:.2f} "
          f"activations={metrics.contingency_activations}")
    return 0 if metrics.success else 3


def cmd_contingency_eval(args):
    cfg = _load_config(args.config, args.set, args.seed)
    out = _out_dir(args, "contingency-eval")
    rows = []
    for n_obs in cfg.get("scenarios", [1]):
        row = contingency_suite(
            n_obstacles=int(n_obs),
            n_runs=int(cfg.get("runs", 100)),
            seed=int(cfg.get("seed", 0)),
            eps_inj=float(cfg.get("eps_inj", 0.3)),
            epsilon=float(cfg.get("epsilon", 0.3)),
            dt=float(cfg.get("dt", 0.05)),
            t_range=tuple(cfg.get("t_range", (4.0, 8.0))),
            r_sense=float(cfg.get("r_sense", 5.5)))
        rows.append(row)
        print(f"contingency-eval: {row.scenario} success={row.success_rate:.3f} "
              f"avg_T_reach={row.avg_t_reach:.3f} collisions={row.collisions}")
    csv_path = os.path.join(out, "contingency_eval.csv")
    write_csv(csv_path, ContingencyRow.HEADER,
              [r.as_csv_row() for r in rows])
    write_manifest(out, "contingency-eval", args.config, cfg.get("seed"),
                   inputs=[args.config], outputs=[csv_path])
    return 0


def cmd_route_eval(args):
    cfg = _load_config(args.config, args.set, args.seed) if args.config \
        else {"seed": args.seed or 0}
    out = _out_dir(args, "route-eval")
    map_path = cfg.get("map", str(DEFAULT_MAP))
    rows, per_run = route_suite(
        map_path,
        n_seeds=int(cfg.get("n_seeds", 10)),
        seed0=int(cfg.get("seed", 0) or 0),
        variants=[tuple(v) for v in cfg["variants"]] if "variants" in cfg
        else None)
    csv_path = os.path.join(out, "route_eval.csv")
    write_csv(csv_path, RouteRow.HEADER, [r.as_csv_row() for r in rows])
    runs_path = os.path.join(out, "route_eval_runs.json")
    with open(runs_path, "w") as f:
        json.dump(per_run, f, indent=2, sort_keys=True)
        f.write("\n")
    write_manifest(out, "route-eval", args.config, cfg.get("seed"),
                   inputs=[p for p in (args.config, map_path) if p],
                   outputs=[csv_path, runs_path])
    for r in rows:
        print(f"route-eval: {r.constraint}/{r.map_mode} "
              f"dist={r.mean_distance:.2f} time={r.mean_wall_time:.2f}s "
              f"success={r.success_rate:.2f}")
    return 0


def read_trace_csv(path):
    rows = []
    with open(path) as f:
        header = f.readline().strip().split(",")
        assert header == TRACE_COLUMNS
        for line in f:
            cells = line.rstrip("\n").split(",")
            row = [float(c) if i != 10 else c for i, c in enumerate(cells)]
            rows.append(row)
    return rows


def cmd_plot(args):
    out = _out_dir(args, "plot")
    outputs = []
    if args.trace:
        trace = read_trace_csv(args.trace)
        sc = Scenario.from_json(args.scenario) if args.scenario else None
        svg_path = os.path.join(out, Path(args.trace).stem + ".svg")
        with open(svg_path, "w") as f:
            f.write(trace_svg(trace, sc))
        xy_path = os.path.join(out, Path(args.trace).stem + "_xy.csv")
        write_csv(xy_path, ["t", "x", "y", "branch"],
                  [[f"{r[0]:.6g}", f"{r[1]:.6g}", f"{r[2]:.6g}", r[10]]
                   for r in trace])
        outputs += [svg_path, xy_path]
    if args.report:
        with open(args.report) as f:
            report = json.load(f)
        err_path = os.path.join(out, "certification_errors.csv")
        write_csv(err_path, ["scenario", "epsilon", "epsilon0", "rho"],
                  [[str(i), f"{r['epsilon']:.6g}", f"{r['epsilon0']:.6g}",
                    f"{r['rho']:.6g}"]
                   for i, r in enumerate(report.get("per_scenario", []))])
        outputs.append(err_path)
    if not outputs:
        print("plot: nothing to do (pass --trace and/or --report)",
              file=sys.stderr)
        return 1
    write_manifest(out, "plot", None, None,
                   inputs=[p for p in (args.trace, args.report) if p],
                   outputs=outputs)
    print(f"plot: wrote {len(outputs)} artifacts under {out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="reachkit",
        description="certified reach-avoid planning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("config", help="JSON config path")
        p.add_argument("--out", help="output directory "
                       "(default $REACHKIT_OUT/<command>)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a dotted config key")

    p = sub.add_parser("solve", help="solve the grid value function")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen-dataset", help="sample obstacle worlds and solve")
    common(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("certify", help="measure surrogate error bounds")
    common(p)
    p.add_argument("--dataset", required=True, help="gen-dataset output dir")
    p.add_argument("--dump-masks", action="store_true",
                   help="embed RLE heading-agnostic masks in the report")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("plan", help="run a mission scenario")
    p.add_argument("scenario", help="scenario JSON path")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("contingency-eval", help="recovery-policy Monte Carlo")
    common(p)
    p.set_defaults(func=cmd_contingency_eval)

    p = sub.add_parser("route-eval", help="multi-goal mission suite")
    p.add_argument("config", nargs="?", help="JSON config path (optional)")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_route_eval)

    p = sub.add_parser("plot", help="emit SVG/CSV plot data")
    p.add_argument("--trace", help="trace CSV from plan")
    p.add_argument("--scenario", help="scenario JSON for world geometry")
    p.add_argument("--report", help="certification report JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
