"""Command-line entry point.

Subcommands: bench, evolve, replay, export, serve.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import agents, harness, patterns
from .config import RunConfig
from .harness import UsageError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lifelab",
        description="Life-like CA lab: benchmarks, evolution, replay, "
                    "export, and the interactive-evolution service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="measure engine throughput")
    p_bench.add_argument("--size", type=int, action="append", required=True,
                         help="square grid size (repeatable)")
    p_bench.add_argument("--rule", action="append", required=True,
                         help="rule string like B3/S23 (repeatable)")
    p_bench.add_argument("--batch", type=int, default=1)
    p_bench.add_argument("--seconds", type=float, required=True)
    p_bench.add_argument("--csv", help="also write the CSV table here")
    p_bench.add_argument("--no-compare", action="store_true",
                         help="skip the fallback-backend comparison rows")

    p_evolve = sub.add_parser("evolve", help="run a CMA-ES evolution")
    p_evolve.add_argument("--config", required=True)
    p_evolve.add_argument("--seed", type=int)
    p_evolve.add_argument("--out")

    p_replay = sub.add_parser("replay", help="roll out a genome or pattern")
    group = p_replay.add_mutually_exclusive_group(required=True)
    group.add_argument("--genome")
    group.add_argument("--pattern")
    p_replay.add_argument("--rule", help="rule string (overrides config)")
    p_replay.add_argument("--wrappers", default=None,
                          help="chain spec like speed:1.0,rnd:0.5")
    p_replay.add_argument("--steps", type=int, required=True)
    p_replay.add_argument("--out", required=True)
    p_replay.add_argument("--config", help="base run config file")
    p_replay.add_argument("--frames", choices=("plaintext", "rle"),
                          default="plaintext")

    p_export = sub.add_parser("export", help="write a genome's first board "
                                             "as a pattern file")
    p_export.add_argument("--genome", required=True)
    p_export.add_argument("--format", choices=("rle", "plaintext"),
                          default="rle")
    p_export.add_argument("--out", help="output file (default: genome path "
                                        "with the format's extension)")
    p_export.add_argument("--config", help="run config for env geometry")

    p_serve = sub.add_parser("serve", help="interactive-evolution service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--dir", default="runs/service")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except UsageError as exc:
        parser.error(str(exc))


def _dispatch(args) -> int:
    if args.command == "bench":
        rows, csv_text, table = harness.bench_report(
            args.size, args.rule, args.seconds, args.batch,
            compare_backends=not args.no_compare)
        print(table)
        if args.csv:
            with open(args.csv, "w", encoding="utf-8") as fh:
                fh.write(csv_text)
        return 0

    if args.command == "evolve":
        cfg = RunConfig.from_file(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out:
            cfg.out_dir = args.out
        def progress(row):
            print(f"gen {row['generation']:4d}  "
                  f"best {row['best_fitness']:12.4f}  "
                  f"mean {row['mean_fitness']:12.4f}")
        history = harness.evolve(cfg, progress=progress)
        if history:
            best = max(h["best_fitness"] for h in history)
            print(f"done: {len(history)} generations, best fitness {best:.4f}")
        return 0

    if args.command == "replay":
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        if not args.config and args.genome:
            _apply_manifest_geometry(cfg, args.genome)
        if args.rule:
            cfg.rule = args.rule
        if args.wrappers is not None:
            cfg.wrappers = args.wrappers
        total, rows = harness.replay(
            cfg, steps=args.steps, out_dir=args.out,
            genome_path=args.genome, pattern_path=args.pattern,
            frame_format=args.frames)
        print(f"replayed {len(rows)} steps, cumulative reward {total:.6f}; "
              f"frames and rewards.csv in {args.out}")
        return 0

    if args.command == "export":
        if args.config:
            env_config = RunConfig.from_file(args.config).env_config()
            agent = agents.load_genome(args.genome, env_config)
            rule = env_config.rule
        else:
            # genome files are self-describing; the rule is only known
            # from a config, so omit it from the header
            agent = agents.load_genome(args.genome)
            env_config = agent.config
            rule = None
        if not isinstance(agent, agents.TogglePolicy):
            raise UsageError("export requires a toggle-family genome")
        board = harness.first_board(agent, env_config)
        ext = ".rle" if args.format == "rle" else ".cells"
        out = args.out or os.path.splitext(args.genome)[0] + ext
        patterns.save_pattern(out, board, rule, fmt=args.format)
        print(f"wrote {out}")
        return 0

    if args.command == "serve":
        from .service import serve
        serve(host=args.host, port=args.port, data_dir=args.dir)
        return 0

    raise UsageError(f"unknown command {args.command!r}")


def _apply_manifest_geometry(cfg: RunConfig, genome_path: str) -> None:
    manifest = agents.read_genome_manifest(genome_path)
    for key in ("obs_h", "obs_w", "act_h", "act_w"):
        if key in manifest:
            setattr(cfg, key, int(manifest[key]))


if __name__ == "__main__":
    sys.exit(main())
