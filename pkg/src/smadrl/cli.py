"""Command-line front end: train / eval / analyze / serve.

Exit codes: 0 success, 2 configuration error, 3 training divergence,
4 I/O error. Multi-seed training fans out over processes; the
SMADRL_THREADS environment variable caps that parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis, harness
from .checkpoint import load_checkpoint, save_checkpoint
from .config import load_config, parse_config
from .errors import CheckpointError, ConfigError, DivergenceError
from .traces import read_trace, write_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4


def _worker_count(num_seeds: int) -> int:
    cap = os.environ.get("SMADRL_THREADS")
    limit = os.cpu_count() or 1
    if cap is not None:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise ConfigError(f"SMADRL_THREADS must be an integer, got {cap!r}")
    return max(1, min(num_seeds, limit))


def _train_one_seed(doc_json: dict, seed: int, out_dir: str) -> str:
    """Run one seed to completion and write its artifacts. Returns the seed dir."""
    doc = parse_config(doc_json)
    seed_dir = Path(out_dir) / f"seed_{seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = harness.run_training(doc, seed)
    except DivergenceError as exc:
        state = getattr(exc, "state", None)
        if state is not None:
            save_checkpoint(seed_dir / "checkpoint.diverged.bin", state)
        log = getattr(exc, "log", None)
        if log is not None:
            harness.write_train_log(log, seed_dir / "train_log.csv", {"seed": seed, "diverged": True})
        # Re-raise without the heavyweight attachments so the error crosses
        # process boundaries cleanly.
        raise DivergenceError(f"seed {seed}: {exc}") from None
    save_checkpoint(seed_dir / "checkpoint.bin", result.state)
    harness.write_train_log(
        result.log, seed_dir / "train_log.csv", {"seed": seed, "method": doc.method}
    )
    return str(seed_dir)


def cmd_train(args: argparse.Namespace) -> int:
    doc = load_config(args.config)
    seeds = [args.seed] if args.seed is not None else list(doc.run.seeds)
    if not seeds:
        raise ConfigError("no seeds: provide --seed or run.seeds in the config")
    if any(s < 0 for s in seeds):
        raise ConfigError("seeds must be nonnegative")
    out_dir = Path(args.out if args.out is not None else doc.run.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc_json = doc.canonical_dict()

    workers = _worker_count(len(seeds))
    if workers == 1:
        for seed in seeds:
            done = _train_one_seed(doc_json, seed, str(out_dir))
            print(f"seed {seed}: artifacts in {done}")
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {seed: pool.submit(_train_one_seed, doc_json, seed, str(out_dir)) for seed in seeds}
            for seed, fut in futures.items():
                done = fut.result()
                print(f"seed {seed}: artifacts in {done}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    state = load_checkpoint(args.checkpoint)
    metrics, trace = harness.evaluate(
        state,
        episodes=args.episodes,
        seed=args.seed,
        collect_trace=args.trace is not None,
        clog_window=args.clog_window,
    )
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    num_agents = len(state.agents)
    analysis.write_reports(metrics, num_agents, out_dir / "metrics.csv", out_dir / "lorenz.json")
    if trace is not None:
        write_trace(trace, args.trace)
        print(f"trace written to {args.trace}")
    total = sum(m.total_pellets for m in metrics)
    print(f"evaluated {args.episodes} episodes: {total} pellets delivered; reports in {out_dir}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    path = Path(args.path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    out_dir = Path(args.out) if args.out else path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".csv":
        metrics = analysis.read_metrics_csv(path)
        if not metrics:
            raise ConfigError(f"{path} holds no episode metrics")
        num_agents = max(len(m.workload) for m in metrics)
    else:
        trace = read_trace(path)
        metrics = analysis.metrics_from_trace(trace, clog_window=args.clog_window)
        if not metrics:
            raise ConfigError(f"{path} holds no steps")
        num_agents = max(len(m.workload) for m in metrics)
    analysis.write_reports(metrics, num_agents, out_dir / "analysis.csv", out_dir / "lorenz.json")
    summary = {
        "episodes": len(metrics),
        "total_pellets": sum(m.total_pellets for m in metrics),
        "clog_events": sum(m.clog_events for m in metrics),
        "mean_oat_fraction": sum(m.oat_fraction for m in metrics) / len(metrics),
        "mean_bb_fraction": sum(m.bb_fraction for m in metrics) / len(metrics),
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"analysis written to {out_dir}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smadrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train agents from a JSON config")
    p_train.add_argument("config", help="path to the experiment config JSON")
    p_train.add_argument("--seed", type=int, default=None, help="override run.seeds with one seed")
    p_train.add_argument("--out", default=None, help="output directory (default: run.output_dir)")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint with greedy policies")
    p_eval.add_argument("checkpoint", help="path to a checkpoint file")
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--trace", default=None, help="write a per-step NDJSON trace here")
    p_eval.add_argument("--out", default=None, help="directory for metrics.csv / lorenz.json")
    p_eval.add_argument("--clog-window", type=int, default=analysis.DEFAULT_CLOG_WINDOW)
    p_eval.set_defaults(func=cmd_eval)

    p_an = sub.add_parser("analyze", help="workload/congestion reports from a trace or metrics CSV")
    p_an.add_argument("path", help="trace NDJSON (with .meta.json sidecar) or metrics CSV")
    p_an.add_argument("--out", default=None)
    p_an.add_argument("--clog-window", type=int, default=analysis.DEFAULT_CLOG_WINDOW)
    p_an.set_defaults(func=cmd_analyze)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
