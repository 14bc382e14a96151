"""Command-line front end.

Verbs:
  run                solve a configured problem, write CSV + JSON artifacts
  compare            run both solvers on one problem, report timing ratios
  export-plot-data   turn a finished run directory into plot-ready series
  check-derivatives  validate a model's AD derivatives against differences

Exit codes: 0 success, 2 invalid configuration, 3 solver/numerical failure
(including a failed derivative check), 4 missing or malformed run artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from importlib import resources

import numpy as np

from . import collocation, presets
from .exceptions import SoftTrajOptError
from .ocp import trajectory_cost
from .warmstart import lift_trajectory, run_ladder

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_ARTIFACTS = 4

_DEFAULTS = {"stage": "full", "N": 100, "t_f": 2.0, "max_iters": 60,
             "hessian_mode": "gauss_newton", "ladder": False, "seed": 0,
             "init_noise": 0.0}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def load_config(path, seed_override=None):
    import jsonschema

    try:
        with open(path) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read config {path}: {e}", EXIT_CONFIG) from e
    schema = json.loads(
        resources.files("softtrajopt").joinpath("schema.json").read_text())
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        field = ".".join(str(p) for p in e.path) or "(top level)"
        raise CliError(f"invalid config field {field}: {e.message}", EXIT_CONFIG)
    full = dict(_DEFAULTS)
    full.update(cfg)
    if seed_override is not None:
        full["seed"] = seed_override
    return full


def output_dir(cfg, override=None):
    root = os.environ.get("SOFTTRAJOPT_OUTPUT_ROOT", ".")
    name = override or cfg.get("output") or \
        f"{cfg['system']}-{cfg['stage']}-{cfg['solver']}-seed{cfg['seed']}"
    path = os.path.join(root, name)
    os.makedirs(path, exist_ok=True)
    return path


def _initial_controls(cfg, prob):
    us = np.zeros((prob.N, prob.cost.m))
    if cfg["init_noise"] > 0:
        rng = np.random.default_rng(cfg["seed"])
        us += cfg["init_noise"] * rng.standard_normal(us.shape)
    return prob.bounds.clamp(us)


def _solve(cfg, model, prob):
    from . import boxiddp

    us0 = _initial_controls(cfg, prob)
    if cfg["solver"] == "collocation":
        res, trace = collocation.solve_collocation(model, prob, us_init=us0)
        return res.xs, res.us, res.total_cost, trace, res.status
    if cfg["ladder"] and cfg["system"] != "rigid-cartpole":
        stages = presets.ladder_stages(cfg["system"], final_stage=cfg["stage"])

        def problem_for(stage, m):
            xt = presets.upright_state(cfg["system"], m)
            cost = presets.swingup_cost(cfg["system"], m, xt)
            from .ocp import OcpProblem
            return OcpProblem(cost, presets.control_bounds(cfg["system"]),
                              t_f=cfg["t_f"], N=cfg["N"], x0=np.zeros(2 * m.n))

        def settings_for(stage, p):
            return presets.swingup_solver_settings(
                p, max_iters=cfg["max_iters"], hessian_mode=cfg["hessian_mode"])

        results = run_ladder(stages, problem_for, settings_for, us_init=us0)
        last = results[-1]
        return (last.policy.xs, last.policy.us, last.policy.total_cost,
                last.trace, last.trace.status)
    settings = presets.swingup_solver_settings(
        prob, max_iters=cfg["max_iters"], hessian_mode=cfg["hessian_mode"])
    policy, trace = boxiddp.solve(model, prob, us_init=us0, settings=settings)
    return policy.xs, policy.us, policy.total_cost, trace, trace.status


def write_trajectory(path, prob, xs, us):
    nx = xs.shape[1]
    m = us.shape[1]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t"] + [f"x{i}" for i in range(nx)]
                   + [f"u{i}" for i in range(m)])
        for k in range(xs.shape[0]):
            u = us[min(k, us.shape[0] - 1)]
            w.writerow([repr(float(k * prob.h))]
                       + [repr(float(v)) for v in xs[k]]
                       + [repr(float(v)) for v in u])


def write_trace(path, trace):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "cost", "grad_norm", "accepted", "alpha",
                    "wall_time"])
        for r in trace.iterations:
            w.writerow([r.index, repr(float(r.cost)), repr(float(r.grad_norm)),
                        int(r.accepted), repr(float(r.alpha)),
                        repr(float(r.wall_time))])


def cmd_run(args):
    cfg = load_config(args.config, args.seed)
    model, prob = _build_problem(cfg)
    try:
        xs, us, total, trace, status = _solve(cfg, model, prob)
    except SoftTrajOptError as e:
        print(f"solver failed: {e}", file=sys.stderr)
        return EXIT_SOLVER
    out = output_dir(cfg, args.output)
    write_trajectory(os.path.join(out, "trajectory.csv"), prob, xs, us)
    write_trace(os.path.join(out, "trace.csv"), trace)
    meta = {"config": cfg, "status": status, "total_cost": float(total),
            "n": model.n, "m": model.m, "h": prob.h, "N": prob.N,
            "iterations": len(trace.iterations)}
    with open(os.path.join(out, "metadata.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"{status}: cost {total:.6g}, {len(trace.iterations)} iterations, "
          f"artifacts in {out}")
    return EXIT_OK if status in ("converged", "max_iters") else EXIT_SOLVER


def _build_problem(cfg):
    if cfg["system"] == "rigid-cartpole":
        from .models import RigidCartPole
        from .ocp import OcpProblem, QuadraticCost
        model = RigidCartPole()
        x_target = np.array([0.0, np.pi, 0.0, 0.0])
        cost = QuadraticCost.from_diagonals(
            [2.0, 10.0, 0.05, 0.05], [1e-4],
            [80.0, 400.0, 5.0, 5.0], x_target)
        prob = OcpProblem(cost, presets.control_bounds("soft-cartpole"),
                          t_f=cfg["t_f"], N=cfg["N"], x0=np.zeros(4))
        return model, prob
    model, prob = presets.swingup_problem(cfg["system"], cfg["stage"],
                                          N=cfg["N"], t_f=cfg["t_f"])
    return model, prob


def cmd_compare(args):
    cfgs = [load_config(p, args.seed) for p in (args.config_a, args.config_b)]
    rows = []
    traces = {}
    for cfg in cfgs:
        model, prob = _build_problem(cfg)
        label = cfg["solver"]
        if label in traces:
            label = f"{label}_b"
        try:
            xs, us, total, trace, status = _solve(cfg, model, prob)
        except SoftTrajOptError as e:
            print(f"{label} failed: {e}", file=sys.stderr)
            return EXIT_SOLVER
        traces[label] = trace
        rows.append((label, status, total, len(trace.iterations),
                     trace.mean_iter_time))
    out = output_dir(cfgs[0], args.output)
    with open(os.path.join(out, "compare.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["solver", "status", "cost", "iterations",
                    "mean_iter_time"])
        for r in rows:
            w.writerow([r[0], r[1], repr(float(r[2])), r[3], repr(float(r[4]))])
    for name, trace in traces.items():
        write_trace(os.path.join(out, f"trace_{name}.csv"), trace)
    for r in rows:
        print(f"{r[0]}: cost {r[2]:.6g} in {r[3]} iterations, "
              f"{r[4]:.3f}s per iteration")
    ratio = rows[1][4] / rows[0][4]
    print(f"per-iteration time ratio ({rows[1][0]} / {rows[0][0]}): "
          f"{ratio:.2f}")
    return EXIT_OK


def cmd_export_plot_data(args):
    run_dir = args.run_dir
    try:
        with open(os.path.join(run_dir, "metadata.json")) as f:
            meta = json.load(f)
    except OSError as e:
        print(f"not a run directory: {e}", file=sys.stderr)
        return EXIT_ARTIFACTS
    cfg = meta["config"]
    n, m = meta["n"], meta["m"]
    rows = []
    with open(os.path.join(run_dir, "trajectory.csv")) as f:
        rd = csv.reader(f)
        header = next(rd)
        for row in rd:
            rows.append([float(v) for v in row])
    data = np.array(rows)
    t = data[:, 0]
    xs = data[:, 1:1 + 2 * n]
    us = data[:, 1 + 2 * n:]
    out = args.output or run_dir
    os.makedirs(out, exist_ok=True)

    series = {}

    def dump(name, cols, arr):
        path = os.path.join(out, f"series_{name}.csv")
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t"] + cols)
            for k in range(arr.shape[0]):
                w.writerow([repr(float(t[k]))] + [repr(float(v)) for v in arr[k]])
        series[name] = {"file": f"series_{name}.csv", "columns": cols}

    dump("controls", [f"u{i}" for i in range(m)], us)

    if cfg["system"] == "rigid-cartpole":
        joint_cols = ["d", "theta"]
        dump("joints", joint_cols, xs[:, :2])
    else:
        model = presets.make_model(cfg["system"], cfg["stage"])
        joint_idx, joint_cols = [], []
        from .gvs import RigidJoint
        for e, sl in zip(model.layout.elements,
                         model.layout.coordinate_slices()):
            if isinstance(e, RigidJoint):
                joint_idx.append(sl.start)
                joint_cols.append("d" if e.kind == "prismatic"
                                 else f"theta{len(joint_cols)}")
        dump("joints", joint_cols, xs[:, joint_idx])
        strains = np.array([np.concatenate(model.mean_strain(x[:n]))
                            for x in xs])
        cols = []
        for li in range(strains.shape[1] // 3):
            cols += [f"link{li}_curvature", f"link{li}_stretch",
                     f"link{li}_shear"]
        dump("mean_strains", cols, strains)

    tr = []
    with open(os.path.join(run_dir, "trace.csv")) as f:
        rd = csv.reader(f)
        next(rd)
        for row in rd:
            tr.append([float(row[0]), float(row[1])])
    tr = np.array(tr) if tr else np.zeros((0, 2))
    path = os.path.join(out, "series_cost.csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "cost"])
        for row in tr:
            w.writerow([int(row[0]), repr(float(row[1]))])
    series["cost"] = {"file": "series_cost.csv",
                      "columns": ["iteration", "cost"]}

    panels = {
        "run": meta,
        "series": series,
        "panels": [
            {"name": "joints", "series": "joints", "x": "t",
             "ylabel": "joint coordinates"},
            {"name": "controls", "series": "controls", "x": "t",
             "ylabel": "control input"},
            {"name": "convergence", "series": "cost", "x": "iteration",
             "ylabel": "cost", "yscale": "log"},
        ],
    }
    if "mean_strains" in series:
        panels["panels"].append({"name": "strains", "series": "mean_strains",
                                 "x": "t", "ylabel": "mean strain"})
    with open(os.path.join(out, "panels.json"), "w") as f:
        json.dump(panels, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {len(series)} series and panels.json to {out}")
    return EXIT_OK


def cmd_check_derivatives(args):
    from .models import RigidCartPole, RigidPendubot, check_derivatives

    if args.system == "rigid-cartpole":
        model = RigidCartPole()
    elif args.system == "rigid-pendubot":
        model = RigidPendubot()
    else:
        try:
            model = presets.make_model(args.system, args.stage)
        except SoftTrajOptError as e:
            print(f"invalid system: {e}", file=sys.stderr)
            return EXIT_CONFIG
    report = check_derivatives(model, samples=args.samples, seed=args.seed or 0,
                               x_scale=0.5, u_scale=5.0)
    print(report)
    return EXIT_OK if report.passed else EXIT_SOLVER


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="softtrajopt",
        description="trajectory optimization for rigid-soft planar chains")
    ap.add_argument("--seed", type=int, default=None,
                    help="override the config seed")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="solve one configured problem")
    p.add_argument("config")
    p.add_argument("--output", default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("compare",
                       help="run two configurations and compare timing")
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("--output", default=None)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("export-plot-data",
                       help="derive plot series from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--output", default=None)
    p.set_defaults(fn=cmd_export_plot_data)

    p = sub.add_parser("check-derivatives",
                       help="compare AD derivatives against finite differences")
    p.add_argument("system")
    p.add_argument("--stage", default="full")
    p.add_argument("--samples", type=int, default=20)
    p.set_defaults(fn=cmd_check_derivatives)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(str(e), file=sys.stderr)
        return e.code
    except SoftTrajOptError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
