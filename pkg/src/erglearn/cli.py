"""Batch command line: synthesize demos, learn tasks, roll out the controller,
evaluate metrics, compare fusion modes, and launch the service.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import baselines, demos, dynamics, metrics, task_learning
from .ergodic_mpc import MpcConfig, run_closed_loop, save_rollout_csv, load_rollout_csv
from .spectral import reconstruct_density

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _read_config_file(path):
    """Optional key=value defaults file ('#' starts a comment)."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got '{raw.strip()}'")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def build_parser() -> _Parser:
    parser = _Parser(prog="erglearn", description=__doc__)
    parser.add_argument("--config", help="key=value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate synthetic demonstrations")
    p.add_argument("system", choices=["cartpole", "planar"])
    p.add_argument("--task", choices=["invert", "reach", "clean"], default=None,
                   help="planar task (cartpole is always inversion)")
    p.add_argument("--pos", type=int, default=3)
    p.add_argument("--neg", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=30.0, help="cartpole demo length [s]")
    p.add_argument("--noise", type=float, default=0.3, help="expert control noise scale")
    p.add_argument("--out", required=True)

    p = sub.add_parser("learn", help="fuse a demo file into a task definition")
    p.add_argument("--demos", required=True)
    p.add_argument("--mode", choices=list(task_learning.MODES), default="posneg")
    p.add_argument("--order", type=int, default=10)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--density-out", default=None, help="write a clipped 64x64 grid (.npy)")
    p.add_argument("--figure", default=None, help="render the density heatmap to this file")

    p = sub.add_parser("rollout", help="run closed-loop trials of a learned task")
    p.add_argument("--task", required=True)
    p.add_argument("--system", choices=["cartpole", "planar"], required=True)
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--r", type=float, default=None, help="control weight diagonal value")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--ts", type=float, default=None, help="control period [s]")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--memory", choices=["full_history", "horizon_only"], default=None)
    p.add_argument("--barrier", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel rollout workers")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("eval", help="recompute metrics for a rollout directory")
    p.add_argument("--rollouts", required=True)
    p.add_argument("--true-task", default=None,
                   help="'cartpole-delta' or a .task.json path for the ergodic metric")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("compare", help="summarize metrics across fusion-mode directories")
    p.add_argument("--dirs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metric", default=None,
                   help="metric column for the comparison figure (default per system)")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("serve", help="launch the teaching service")
    p.add_argument("--port", type=int, default=int(os.environ.get("ERGLEARN_PORT", 8753)))
    p.add_argument(
        "--tick-rate", type=float, default=float(os.environ.get("ERGLEARN_TICK_RATE", 50.0))
    )
    p.add_argument(
        "--cors", nargs="*",
        default=os.environ["ERGLEARN_CORS"].split(",") if "ERGLEARN_CORS" in os.environ else None,
        help="allowed origins",
    )
    return parser


def cmd_synth(args) -> int:
    out = []
    if args.system == "cartpole":
        if args.task not in (None, "invert"):
            raise ValueError("cartpole only supports the inversion task")
        for i in range(args.pos):
            out.append(baselines.expert_cartpole(args.duration, args.noise, seed=args.seed + i))
        for i in range(args.neg):
            out.append(baselines.negative_cartpole(args.duration, seed=args.seed + 500 + i))
    else:
        if args.task not in ("reach", "clean"):
            raise ValueError("planar synth needs --task reach or --task clean")
        for i in range(args.pos):
            out.append(baselines.scripted_planar(args.task, "positive", seed=args.seed + i))
        for i in range(args.neg):
            out.append(baselines.scripted_planar(args.task, "negative", seed=args.seed + 500 + i))
    demos.save_demos(args.out, out, system=args.system)
    print(f"wrote {len(out)} demos to {args.out}")
    return 0


def cmd_learn(args) -> int:
    demo_set = demos.load_demo_set(args.demos)
    cfg = task_learning.FusionConfig(order=args.order, beta=args.beta, gamma=args.gamma)
    task = task_learning.learn_task(demo_set, cfg, mode=args.mode)
    task_learning.save_task(args.out, task)
    print(f"wrote {args.mode} task (order {args.order}) to {args.out}")
    if args.density_out:
        grid = reconstruct_density(task.phi, 64, clip_negative=True)
        np.save(args.density_out, grid)
        print(f"wrote 64x64 density grid to {args.density_out}")
    if args.figure:
        from . import plotting

        plotting.density_figure(
            args.figure, task, demos=demo_set.demos, system=demo_set.system
        )
        print(f"wrote density figure to {args.figure}")
    return 0


def _mpc_config(args, task) -> MpcConfig:
    overrides = {"order": task.phi.order}
    if args.q is not None:
        overrides["q"] = args.q
    if args.r is not None:
        overrides["r_diag"] = (args.r,)
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.ts is not None:
        overrides["control_period"] = args.ts
    if args.iters is not None:
        overrides["max_iters"] = args.iters
    if args.memory is not None:
        overrides["memory"] = args.memory
    if args.barrier is not None:
        overrides["barrier_weight"] = args.barrier
    return MpcConfig(**overrides)


def _run_trial(system_name, task_path, cfg, duration, seed):
    system = dynamics.make_system(system_name)
    task = task_learning.load_task(task_path)
    avoid = None
    if system_name == "planar":
        obs = metrics.DEFAULT_OBSTACLE
        avoid = (obs.center, obs.radius + 0.07)
    x0 = dynamics.initial_state(system, seed, avoid=avoid)
    result = run_closed_loop(system, task, cfg, x0, duration, meta={"seed": seed})
    return result


def _metrics_row(trial_id, mode, system_name, result, true_task=None):
    row = {"id": trial_id, "mode": mode}
    if system_name == "cartpole":
        outcome = metrics.cartpole_success(result.times, result.states)
        row["success_time"] = outcome.total_success_time
        row["first_success"] = outcome.first_success_time
        periodic = [True, False]
    else:
        score = metrics.cleaning_score(result.states[:, :2])
        row["cleaning_m"] = score.m
        row["collided"] = score.collided
        row["reach"] = metrics.reach_success(result.states[:, :2])
        periodic = None
    if true_task is not None:
        row["eps_true"] = metrics.ergodicity_vs_true(
            result.times, result.states, true_task, periodic=periodic
        )
    return row


def _resolve_true_task(name, order):
    if name is None:
        return None
    if name == "cartpole-delta":
        return task_learning.true_task_cartpole(order)
    return task_learning.load_task(name)


def cmd_rollout(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    task = task_learning.load_task(args.task)
    cfg = _mpc_config(args, task)
    true_task = task_learning.true_task_cartpole(task.phi.order) if args.system == "cartpole" else None
    seeds = [args.seed + i for i in range(args.trials)]

    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(
                pool.map(_run_trial, [args.system] * len(seeds), [args.task] * len(seeds),
                         [cfg] * len(seeds), [args.duration] * len(seeds), seeds)
            )
    else:
        results = [_run_trial(args.system, args.task, cfg, args.duration, s) for s in seeds]

    system = dynamics.make_system(args.system)
    rows = []
    for i, (seed, result) in enumerate(zip(seeds, results)):
        trial_id = f"trial_{i:03d}"
        save_rollout_csv(out_dir / f"{trial_id}.rollout.csv", result,
                         state_names=system.state_names)
        rows.append(_metrics_row(trial_id, task.mode, args.system, result, true_task))
        if not args.no_figures:
            from . import plotting

            mask = None
            if args.system == "cartpole":
                mask = (np.abs(result.states[:, 0]) < metrics.THETA_THRESHOLD) & (
                    np.abs(result.states[:, 1]) < metrics.THETA_DOT_THRESHOLD
                )
            plotting.rollout_figure(
                out_dir / f"{trial_id}.png", result.times, result.states, args.system,
                eps_running=result.eps_running, success_mask=mask,
                title=f"{task.mode} {trial_id} (seed {seed})",
            )
    metrics.write_metrics_csv(out_dir / "rollouts.metrics.csv", rows)
    manifest = {
        "system": args.system,
        "task": Path(args.task).name,
        "mode": task.mode,
        "order": task.phi.order,
        "duration": args.duration,
        "seeds": seeds,
        "trials": args.trials,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True) + "\n")
    if not args.no_figures:
        from . import plotting

        best = max(range(len(results)), key=lambda i: rows[i].get("success_time") or
                   rows[i].get("cleaning_m") or 0.0)
        plotting.density_figure(
            out_dir / "task_overlay.png", task,
            trajectory=results[best].states[:, list(task.projection)],
            system=args.system, title=f"{task.mode} task with best rollout",
        )
    print(f"wrote {len(results)} rollouts to {out_dir}")
    return 0


def cmd_eval(args) -> int:
    roll_dir = Path(args.rollouts)
    manifest_path = roll_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{roll_dir} has no manifest.json (not a rollout directory?)")
    manifest = json.loads(manifest_path.read_text())
    system_name = manifest["system"]
    csvs = sorted(roll_dir.glob("trial_*.rollout.csv"))
    if not csvs:
        raise FileNotFoundError(f"no trial_*.rollout.csv files in {roll_dir}")
    true_task = _resolve_true_task(args.true_task, manifest.get("order", 10))
    if true_task is None and system_name == "cartpole":
        true_task = task_learning.true_task_cartpole(manifest.get("order", 10))
    rows = []
    for path in csvs:
        times, states, controls, eps = load_rollout_csv(path)
        result = SimpleNamespace(times=times, states=states)
        rows.append(
            _metrics_row(path.name.split(".")[0], manifest.get("mode", "?"), system_name,
                         result, true_task)
        )
    metrics.write_metrics_csv(args.out, rows)
    if not args.no_figures:
        from . import plotting

        key = "success_time" if system_name == "cartpole" else "cleaning_m"
        vals = [row[key] for row in rows if row.get(key) is not None]
        if vals:
            plotting.compare_figure(
                Path(args.out).with_suffix(".png"), {manifest.get("mode", "?"): vals}, key,
                title=f"{system_name} {key}",
            )
    print(f"wrote {len(rows)} metric rows to {args.out}")
    return 0


def cmd_compare(args) -> int:
    summary_rows = []
    per_mode = {}
    key = args.metric
    for d in args.dirs:
        d = Path(d)
        metrics_path = d / "rollouts.metrics.csv"
        if not metrics_path.exists():
            candidates = sorted(d.glob("*.metrics.csv"))
            if not candidates:
                raise FileNotFoundError(f"no metrics CSV found in {d}")
            metrics_path = candidates[0]
        rows = metrics.read_metrics_csv(metrics_path)
        if not rows:
            raise ValueError(f"{metrics_path} contains no metric rows")
        mode = rows[0]["mode"]
        if key is None:
            key = "cleaning_m" if rows[0].get("cleaning_m") is not None else "success_time"
        vals = [r[key] for r in rows if r.get(key) is not None]
        if not vals:
            raise ValueError(f"{metrics_path} has no values for metric '{key}'")
        collisions = sum(1 for r in rows if r.get("collided"))
        reaches = sum(1 for r in rows if r.get("reach"))
        summary_rows.append(
            {
                "mode": mode,
                "n": len(vals),
                "median": statistics.median(vals),
                "mean": statistics.fmean(vals),
                "collisions": collisions,
                "reaches": reaches,
            }
        )
        per_mode[mode] = vals
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"mode,n,median_{key},mean_{key},collisions,reaches\n")
        for row in summary_rows:
            fh.write(
                f"{row['mode']},{row['n']},{row['median']!r},{row['mean']!r},"
                f"{row['collisions']},{row['reaches']}\n"
            )
    header = f"{'mode':8s} {'n':>3s} {'median':>12s} {'mean':>12s} {'coll':>5s} {'reach':>6s}"
    print(header)
    for row in summary_rows:
        print(
            f"{row['mode']:8s} {row['n']:3d} {row['median']:12.5f} {row['mean']:12.5f} "
            f"{row['collisions']:5d} {row['reaches']:6d}"
        )
    if not args.no_figures:
        from . import plotting

        plotting.compare_figure(Path(args.out).with_suffix(".png"), per_mode, key)
    print(f"wrote summary to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import socket

    import uvicorn

    from .service import create_app

    app = create_app(tick_rate=args.tick_rate, cors_origins=args.cors)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind(("0.0.0.0", args.port))
    port = sock.getsockname()[1]
    print(f"serving on port {port}", flush=True)
    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    server.run(sockets=[sock])
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "learn": cmd_learn,
    "rollout": cmd_rollout,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # apply config-file defaults before the real parse
    if "--config" in argv:
        idx = argv.index("--config")
        try:
            defaults = _read_config_file(argv[idx + 1])
        except (OSError, ValueError, IndexError) as err:
            sys.stderr.write(f"error: bad config file: {err}\n")
            return USAGE_EXIT
        for sub_action in parser._subparsers._group_actions:
            for sub in sub_action.choices.values():
                known = {a.dest for a in sub._actions}
                sub.set_defaults(**{k: _coerce(v) for k, v in defaults.items() if k in known})
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if err.code is not None else USAGE_EXIT
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError, KeyError) as err:
        sys.stderr.write(f"error: {err}\n")
        return RUNTIME_EXIT


def _coerce(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


if __name__ == "__main__":
    sys.exit(main())
