"""Command-line front end: training, evaluation, terrain tooling, replay
dumps, and ablation-matrix generation.

Exit codes: 0 success, 2 configuration error, 3 runtime fault. Artifacts
land under ./runs unless redirected with the QUADPARKOUR_OUT variable or a
per-command --out flag.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

from .config import (
    ExperimentConfig,
    ablation_table,
    config_delta,
    parse_config,
    serialize_config,
)
from .errors import ConfigError, RuntimeFault
from .evaluation import barkour_report, policy_episode_runner, run_course, skill_sweep
from .models import NetworkShape, Policy, load_checkpoint
from .terrain import CATEGORIES, N_LEVELS, ObstacleSpec, generate, save_heightfield
from .trainer import run as train_run

OUTPUT_ROOT_VAR = "QUADPARKOUR_OUT"


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_VAR, "runs"))


def _out_dir(override: str | None, default_name: str) -> Path:
    path = Path(override) if override else output_root() / default_name
    path.mkdir(parents=True, exist_ok=True)
    return path


def git_blob_sha1(data: bytes) -> str:
    """Content hash of an input file in git blob form (size-prefixed sha1)."""
    return hashlib.sha1(b"blob %d\x00" % len(data) + data).hexdigest()


def network_shape(config: ExperimentConfig) -> NetworkShape:
    """Full-size network wiring with the config's width choices applied."""
    return dataclasses.replace(
        NetworkShape(),
        elev_code=config.network.elevation_code,
        hist_code=config.network.history_code,
        hidden=tuple(config.network.hidden))


# ----------------------------------------------------------------------
# experiment orchestration

def run_experiment(config: ExperimentConfig, out_dir=None, *,
                   resume_from=None, source: bytes | None = None) -> dict:
    """Train per `config` and leave a complete artifact set in one place:
    the canonical config, metrics CSV + digest, checkpoints, and a report
    embedding the config hash and a content hash of the input file."""
    out = Path(out_dir) if out_dir else output_root() / f"exp_{config.hash()}"
    out.mkdir(parents=True, exist_ok=True)
    canonical = serialize_config(config)
    try:
        (out / "config.toml").write_text(canonical)
    except OSError as err:
        raise RuntimeFault(f"cannot write artifacts under {out}: {err}") from err
    result = train_run(config.to_train_config(), out, resume_from,
                       shape=network_shape(config), config_hash=config.hash())
    report = {
        "config_hash": config.hash(),
        "input_blob": git_blob_sha1(source if source is not None
                                    else canonical.encode()),
        "iterations": result["iterations"],
        "metrics_digest": result["digest"],
        "final_checkpoint": str(out / "checkpoint_final.bin"),
        "final_metrics": result["final"],
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def _load_config(path: str | None) -> tuple[ExperimentConfig, bytes | None]:
    if path is None:
        return ExperimentConfig(), None
    try:
        source = Path(path).read_bytes()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(source.decode()), source


def _load_policy(checkpoint: str, config_path: str | None) -> Policy:
    config, _ = _load_config(config_path)
    policy = Policy(network_shape(config), seed=config.seed,
                    std_cap_enabled=config.ablation.std_clip)
    try:
        load_checkpoint(checkpoint, policy)
    except OSError as err:
        raise RuntimeFault(f"cannot read checkpoint {checkpoint}: {err}") from err
    return policy


# ----------------------------------------------------------------------
# verbs

def _cmd_train(args) -> int:
    config, source = _load_config(args.config)
    report = run_experiment(config, args.out, resume_from=args.resume,
                            source=source)
    print(json.dumps({k: report[k] for k in
                      ("config_hash", "input_blob", "iterations",
                       "metrics_digest", "final_checkpoint")}, indent=2))
    return 0


def _cmd_eval_barkour(args) -> int:
    policy = _load_policy(args.checkpoint, args.config)
    report = barkour_report(policy, runs=args.runs, v_cmd=args.v_cmd,
                            seed=args.seed)
    out = _out_dir(args.out, "barkour")
    (out / "barkour.json").write_text(json.dumps(report, indent=2) + "\n")
    with (out / "barkour_runs.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "completed", "t_run", "v_cmd", "penalties",
                         "score"])
        for k, row in enumerate(report["runs"]):
            writer.writerow([k, int(row["completed"]), f"{row['t_run']:.3f}",
                             row["v_cmd"], row["penalties"],
                             f"{row['score']:.4f}"])
    print(f"runs={args.runs} completion_rate={report['completion_rate']:.3f} "
          f"mean_score={report['mean_score']:.4f} -> {out}")
    return 0


def _cmd_eval_sweep(args) -> int:
    try:
        grid = [float(tok) for tok in args.grid.split(",") if tok.strip()]
    except ValueError as err:
        raise ConfigError(f"bad difficulty grid {args.grid!r}: {err}") from err
    if not grid:
        raise ConfigError("difficulty grid is empty")
    policy = _load_policy(args.checkpoint, args.config)
    run_episode = policy_episode_runner(policy, v_cmd=args.v_cmd)
    points = skill_sweep(run_episode, args.category, grid, runs=args.runs,
                         seed=args.seed)
    out = _out_dir(args.out, "sweep")
    (out / f"sweep_{args.category}.json").write_text(
        json.dumps(points, indent=2) + "\n")
    with (out / f"sweep_{args.category}.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["difficulty", "successes", "runs", "probability",
                         "lo", "hi"])
        for pt in points:
            writer.writerow([pt["difficulty"], pt["successes"], pt["runs"],
                             f"{pt['probability']:.4f}", f"{pt['lo']:.4f}",
                             f"{pt['hi']:.4f}"])
    for pt in points:
        print(f"{args.category} d={pt['difficulty']:.2f}: "
              f"{pt['probability']:.2f} [{pt['lo']:.2f}, {pt['hi']:.2f}] "
              f"({pt['successes']}/{pt['runs']})")
    return 0


def _cmd_terrain_gen(args) -> int:
    if not 0 <= args.level < N_LEVELS:
        raise ConfigError(f"level must lie in [0, {N_LEVELS})")
    field = generate(ObstacleSpec(args.category, args.level), seed=args.seed)
    default = f"{args.category.lower()}_l{args.level:02d}_s{args.seed}.hf"
    path = Path(args.out) if args.out else output_root() / default
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        save_heightfield(field, path)
    except OSError as err:
        raise RuntimeFault(f"cannot write {path}: {err}") from err
    rows, cols = field.heights.shape
    print(f"{args.category} level {args.level} seed {args.seed}: "
          f"{rows}x{cols} cells, {len(field.obstacle_spans)} obstacle spans, "
          f"params {field.resolved_parameters} -> {path}")
    return 0


def _cmd_replay(args) -> int:
    policy = _load_policy(args.checkpoint, args.config)
    result, trajectory = run_course(policy, args.v_cmd, seed=args.seed)
    out = _out_dir(args.out, "replay")
    path = out / f"replay_s{args.seed}.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "x", "y", "stumble"])
        for t, (x, y), stumble in zip(trajectory["time"], trajectory["pos"],
                                      trajectory["stumble"]):
            writer.writerow([f"{t:.3f}", f"{x:.4f}", f"{y:.4f}", int(stumble)])
    print(f"completed={result.completed} t_run={result.t_run:.2f}s "
          f"penalties={result.penalties} score={result.score:.4f} -> {path}")
    return 0


def _cmd_ablate(args) -> int:
    base, _ = _load_config(args.base)
    rows = ablation_table(args.table, base)
    out = _out_dir(args.out, f"ablate_{args.table}")
    index = []
    for name, config in rows.items():
        path = out / f"{args.table}_{name}.toml"
        path.write_text(serialize_config(config))
        index.append({"row": name, "config": path.name,
                      "config_hash": config.hash(),
                      "delta": config_delta(base, config)})
    (out / "index.json").write_text(json.dumps(index, indent=2) + "\n")
    print(f"{len(rows)} configs -> {out}")
    if args.run:
        for name, config in rows.items():
            print(f"running {args.table}/{name} ...")
            report = run_experiment(config, out / name)
            print(f"  digest {report['metrics_digest'][:16]}")
    return 0


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadparkour",
        description="Train, evaluate, and dissect obstacle-course "
                    "locomotion policies.")
    sub = parser.add_subparsers(dest="verb", required=True)

    train = sub.add_parser("train", help="run a training experiment")
    train.add_argument("config", nargs="?",
                       help="experiment TOML; defaults when omitted")
    train.add_argument("--out", help="artifact directory")
    train.add_argument("--resume", help="checkpoint to continue from")
    train.set_defaults(handler=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a trained policy")
    ev_sub = ev.add_subparsers(dest="mode", required=True)
    barkour = ev_sub.add_parser("barkour",
                                help="scored runs on the benchmark course")
    barkour.add_argument("--checkpoint", required=True)
    barkour.add_argument("--config", help="config that produced the checkpoint")
    barkour.add_argument("--runs", type=int, default=30)
    barkour.add_argument("--v-cmd", type=float, default=0.6, dest="v_cmd")
    barkour.add_argument("--seed", type=int, default=0)
    barkour.add_argument("--out")
    barkour.set_defaults(handler=_cmd_eval_barkour)
    sweep = ev_sub.add_parser("sweep",
                              help="success probability across difficulty")
    sweep.add_argument("--checkpoint", required=True)
    sweep.add_argument("--config")
    sweep.add_argument("--category", required=True, choices=CATEGORIES)
    sweep.add_argument("--grid", default="0.0,0.25,0.5,0.75,1.0",
                       help="comma-separated difficulty fractions in [0, 1]")
    sweep.add_argument("--runs", type=int, default=30)
    sweep.add_argument("--v-cmd", type=float, default=0.6, dest="v_cmd")
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out")
    sweep.set_defaults(handler=_cmd_eval_sweep)

    terrain = sub.add_parser("terrain", help="terrain tooling")
    terrain_sub = terrain.add_subparsers(dest="mode", required=True)
    gen = terrain_sub.add_parser("gen", help="generate one field and save it")
    gen.add_argument("--category", required=True, choices=CATEGORIES)
    gen.add_argument("--level", type=int, default=0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", help="output file path")
    gen.set_defaults(handler=_cmd_terrain_gen)

    replay = sub.add_parser(
        "replay", help="deterministic course run, trajectory to CSV")
    replay.add_argument("--checkpoint", required=True)
    replay.add_argument("--config")
    replay.add_argument("--v-cmd", type=float, default=0.6, dest="v_cmd")
    replay.add_argument("--seed", type=int, default=0)
    replay.add_argument("--out")
    replay.set_defaults(handler=_cmd_replay)

    ablate = sub.add_parser("ablate",
                            help="emit one config per ablation row")
    ablate.add_argument("--table", required=True,
                        choices=("input", "reward", "design"))
    ablate.add_argument("--base", help="base config the deltas apply to")
    ablate.add_argument("--out")
    ablate.add_argument("--run", action="store_true",
                        help="also train every row sequentially")
    ablate.set_defaults(handler=_cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except RuntimeFault as err:
        print(f"runtime fault: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
