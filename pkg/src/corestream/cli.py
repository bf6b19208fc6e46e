"""Command line front end.

Subcommands: reduce, tree-build, sample, track, bench,
compare-sampling.  Exit status 0 on success, 2 on usage or input
validation problems, 1 on internal errors.  Every command is
deterministic given an explicit --seed; commands that draw randomness
print the effective seed they used.
"""

from __future__ import annotations

import argparse
import csv
import json
import secrets
import sys
from dataclasses import replace
from importlib import resources

from . import bench, io
from .blocks import measure_epsilon, reduce_block, ReductionParams
from .sampling import hierarchical_sample, random_sample, root_sample, subsample
from .svm import TrainParams
from .tracking import (
    DetectParams,
    SAMPLER_MODES,
    SyntheticStreamConfig,
    TrackerParams,
    config_from_dict,
    generate_stream,
    track_stream,
)
from .tree import CoresetTree


class CommandError(Exception):
    """User-facing problem; maps to exit status 2."""


def _effective_seed(given: int | None) -> int:
    if given is not None:
        return given
    return secrets.randbelow(2**31)


def _print_seed(seed: int) -> None:
    print(f"seed: {seed}")


def _load_stream_config(source: str, seed_override: int | None) -> SyntheticStreamConfig:
    """Load a stream config from a path or a bundled name."""
    bundled = resources.files("corestream").joinpath(f"configs/{source}.json")
    try:
        with open(source, "r", encoding="ascii") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        if not bundled.is_file():
            raise CommandError(
                f"no config file {source!r} and no bundled config of that name"
            ) from None
        raw = json.loads(bundled.read_text(encoding="ascii"))
    except json.JSONDecodeError as exc:
        raise CommandError(f"{source}: line {exc.lineno}: {exc.msg}") from None
    try:
        config = config_from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise CommandError(f"{source}: {exc}") from None
    if seed_override is not None:
        config = replace(config, seed=seed_override)
    return config


def _train_params(args: argparse.Namespace) -> TrainParams:
    return TrainParams(
        regularization=args.reg,
        iterations=args.iters,
        nu=args.nu,
    )


def _int_list(text: str, what: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise CommandError(f"{what} must be a comma-separated integer list, got {text!r}")
    if not values:
        raise CommandError(f"{what} must not be empty")
    return values


def cmd_reduce(args: argparse.Namespace) -> int:
    block = io.read_features(args.infile)
    if args.epsilon_k >= block.dim:
        raise CommandError(
            f"--epsilon-k {args.epsilon_k} must be below the data dimension {block.dim}"
        )
    params = ReductionParams(n=args.n, k=args.epsilon_k)
    seed = _effective_seed(args.seed)
    _print_seed(seed)
    summary = reduce_block(block, params)
    io.write_coreset(args.out, summary)
    eps = measure_epsilon(block, summary, args.epsilon_k, trials=args.trials, seed=seed)
    print(f"rows: {summary.block.rows}")
    print(f"c: {summary.c!r}")
    print(f"epsilon: {eps!r}")
    return 0


def cmd_tree_build(args: argparse.Namespace) -> int:
    block = io.read_features(args.infile)
    tree = CoresetTree(args.n, block.dim)
    for row in block.values:
        tree.push_point(row)
    io.write_snapshot(args.snapshot_out, tree.snapshot())
    io.write_telemetry(args.telemetry_out, tree.telemetry())
    print(f"points: {tree.points_seen}")
    print(f"leaves: {tree.leaves_seen}")
    print(f"merges: {tree.merge_count}")
    print(f"live_nodes: {tree.live_node_count()}")
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    view = io.read_snapshot(args.snapshot)
    if args.mode in ("random", "subsample"):
        if args.features is None:
            raise CommandError(
                f"--mode {args.mode} samples from raw history; pass the original "
                "stream with --features"
            )
        history = io.read_features(args.features)
        if args.mode == "random":
            seed = _effective_seed(args.seed)
            _print_seed(seed)
            sample = random_sample(history, view.n, seed)
        else:
            sample = subsample(history, view.n)
    elif args.mode == "hierarchical":
        sample = hierarchical_sample(view)
    elif args.mode == "root":
        sample = root_sample(view)
    else:  # pragma: no cover - argparse choices guard this
        raise CommandError(f"unknown mode {args.mode!r}")
    io.write_sample(args.out, sample, args.mode)
    print(f"rows: {sample.rows.rows}")
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    config = _load_stream_config(args.config, args.seed)
    _print_seed(config.seed)
    frames = generate_stream(config)
    tracker = TrackerParams(n=args.n, sampler=args.sampler, em_every=args.em_every)
    detect_params = DetectParams(threshold=args.threshold, radius=args.radius)
    run = track_stream(
        frames,
        config,
        tracker=tracker,
        train_params=_train_params(args),
        detect_params=detect_params,
    )
    io.write_track_run(args.out, run)
    print(f"frames: {len(run.records)}")
    print(f"bootstrap_frames: {run.bootstrap_frames}")
    print(f"success_rate: {run.success_rate:.3f}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    grid = _int_list(args.grid, "--grid")
    seed = _effective_seed(args.seed)
    _print_seed(seed)
    with open(args.out, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        if args.mode in ("time", "space"):
            writer.writerow(
                [
                    "points",
                    "leaves",
                    "merges",
                    "mean_merges_per_push",
                    "amortized_push_seconds",
                    "max_live_nodes",
                    "live_bound",
                ]
            )
            for points in grid:
                row = bench.stream_bench(points, args.n, args.dim, seed)
                writer.writerow(
                    [
                        row.points,
                        row.leaves,
                        row.merges,
                        repr(row.mean_merges_per_push),
                        repr(row.amortized_push_seconds),
                        row.max_live_nodes,
                        row.live_bound,
                    ]
                )
                if args.mode == "space" and row.max_live_nodes > row.live_bound:
                    print(
                        f"warning: p={row.points} live nodes {row.max_live_nodes} "
                        f"exceed bound {row.live_bound}"
                    )
        else:
            writer.writerow(
                ["points", "sample_rows", "sample_train_seconds", "full_train_seconds"]
            )
            for points in grid:
                row = bench.svm_time_bench(
                    points, args.n, args.dim, seed, _train_params(args)
                )
                writer.writerow(
                    [
                        row.points,
                        row.sample_rows,
                        repr(row.sample_train_seconds),
                        repr(row.full_train_seconds),
                    ]
                )
    print(f"rows: {len(grid)}")
    return 0


def cmd_compare_sampling(args: argparse.Namespace) -> int:
    config = _load_stream_config(args.config, None)
    n_values = _int_list(args.n_list, "--n-list")
    seeds = _int_list(args.seeds, "--seeds")
    rows = bench.compare_samplers(
        config,
        n_values,
        seeds,
        tracker=TrackerParams(n=n_values[0], em_every=args.em_every),
        train_params=_train_params(args),
        detect_params=DetectParams(threshold=args.threshold, radius=args.radius),
    )
    with open(args.out, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "seed", "mode", "success"])
        for row in rows:
            writer.writerow([row["n"], row["seed"], row["mode"], repr(row["success"])])
    means = bench.summarize_comparison(rows)
    for (n, mode), mean in sorted(means.items()):
        print(f"n={n} {mode}: {mean:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corestream",
        description="Streaming coreset tree: reduce, build, sample, track, bench.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="compress a feature file to at most n rows")
    p.add_argument("--in", dest="infile", required=True, help="input feature file")
    p.add_argument("--n", type=int, required=True, help="row budget")
    p.add_argument("--out", required=True, help="output summary block (JSON)")
    p.add_argument("--epsilon-k", type=int, default=1, help="probe subspace dimension")
    p.add_argument("--trials", type=int, default=100, help="probe count")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("tree-build", help="stream a feature file through a tree")
    p.add_argument("--in", dest="infile", required=True, help="input feature file")
    p.add_argument("--n", type=int, required=True, help="leaf size")
    p.add_argument("--snapshot-out", required=True, help="tree snapshot (JSON)")
    p.add_argument("--telemetry-out", required=True, help="telemetry CSV")
    p.set_defaults(func=cmd_tree_build)

    p = sub.add_parser("sample", help="draw a training sample from a snapshot")
    p.add_argument("--snapshot", required=True, help="tree snapshot (JSON)")
    p.add_argument("--mode", required=True, choices=SAMPLER_MODES)
    p.add_argument("--out", required=True, help="sample CSV")
    p.add_argument(
        "--features", default=None, help="raw stream file, required for random/subsample"
    )
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("track", help="run the tracking loop on a synthetic stream")
    p.add_argument("--config", required=True, help="stream config path or bundled name")
    p.add_argument("--n", type=int, default=20, help="leaf size")
    p.add_argument("--sampler", default="hierarchical", choices=SAMPLER_MODES)
    p.add_argument("--nu", type=float, default=0.5)
    p.add_argument("--reg", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--em-every", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--out", required=True, help="per-frame track table CSV")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("bench", help="measure push cost, stack size or training time")
    p.add_argument("--mode", required=True, choices=("time", "space", "svm-time"))
    p.add_argument("--grid", required=True, help="comma-separated stream lengths")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--nu", type=float, default=0.5)
    p.add_argument("--reg", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="results CSV")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser(
        "compare-sampling", help="paired sampler comparison on identical streams"
    )
    p.add_argument("--config", required=True, help="stream config path or bundled name")
    p.add_argument("--n-list", required=True, help="comma-separated leaf sizes")
    p.add_argument("--seeds", required=True, help="comma-separated stream seeds")
    p.add_argument("--nu", type=float, default=0.5)
    p.add_argument("--reg", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--em-every", type=int, default=1)
    p.add_argument("--out", required=True, help="results CSV")
    p.set_defaults(func=cmd_compare_sampling)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CommandError, io.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected, report as internal
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
