"""Command line entry point.

    tubenull <kind> --config <path> [--seed S] [--out DIR]

Kinds: build, lines, convex, tubes, fibers, report.  Exit codes: 0 ok,
1 a checked property failed, 2 configuration or runtime error (an
error.json with details is written to the output directory when
possible).  TUBENULL_THREADS caps worker parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .config import KINDS, ConfigError, validate_config
from .runner import RunResult, atomic_write_text, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tubenull",
        description="Random dyadic fractal measures, curve nets, and tube experiments",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        k = sub.add_parser(kind, help=f"run a {kind} experiment")
        if kind == "report":
            k.add_argument("--run-dir", help="run directory to summarize")
            k.add_argument("--config", help="config file (TOML or JSON)")
        else:
            k.add_argument("--config", required=True, help="config file (TOML or JSON)")
        k.add_argument("--seed", type=int, help="override the config seed")
        k.add_argument("--out", help="override the output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.kind == "report" and not args.config:
            if not args.run_dir:
                raise ConfigError("run_dir: pass --run-dir or a config file")
            config = validate_config(json.dumps({"kind": "report", "run_dir": args.run_dir}))
        else:
            path = Path(args.config)
            if not path.exists():
                raise ConfigError(f"config: file not found: {path}")
            raw = path.read_text()
            config = validate_config(raw, source=str(path))
            if config.kind != args.kind:
                raise ConfigError(
                    f"kind: config declares {config.kind!r} but the subcommand is {args.kind!r}"
                )
        if args.seed is not None:
            config.seed = args.seed
        if args.out:
            config.out = args.out
        for warning in config.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        result = run_experiment(config)
        _print_outcome(result)
        return result.status
    except ConfigError as err:
        _emit_error(args, "config", str(err))
        return 2
    except Exception as err:  # noqa: BLE001 - structured crash report
        _emit_error(args, type(err).__name__, str(err), traceback.format_exc())
        return 2


def _print_outcome(result: RunResult) -> None:
    verdicts = result.summary.get("verdicts", {})
    for name, verdict in sorted(verdicts.items()):
        print(f"{name}: {verdict}")
    for name, path in sorted(result.files.items()):
        print(f"wrote {name}: {path}")
    if result.status == 1:
        print("property failure (exit 1)", file=sys.stderr)


def _emit_error(args, kind: str, message: str, trace: str = "") -> None:
    payload = {"error": kind, "message": message}
    if trace:
        payload["traceback"] = trace
    print(f"error: {message}", file=sys.stderr)
    out = getattr(args, "out", None)
    if out:
        try:
            atomic_write_text(Path(out) / "error.json", json.dumps(payload, indent=2))
        except OSError:
            pass


if __name__ == "__main__":
    sys.exit(main())
