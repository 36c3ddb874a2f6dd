"""Operator entry point.

Subcommands:
  run       live session: simulation + nodes + WebSocket bridge
  eval      headless corpus evaluation on an accelerated clock
  validate  check every config file against its invariants

Exit codes: 0 ok, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import signal
import sys
import threading
from pathlib import Path

from . import metrics
from .bridge import Bridge, BridgeError
from .bus import SchemaError
from .clock import FakeClock
from .nlu import GrammarError
from .dispatch import ConfigError
from .runtime import CorpusError, ScenarioConfig, Session, evaluate_corpus
from .world import WorldError

CONFIG_ERRORS = (WorldError, GrammarError, ConfigError, CorpusError,
                 SchemaError, FileNotFoundError)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    defaults = ScenarioConfig()
    parser.add_argument("--world", type=Path, default=defaults.world)
    parser.add_argument("--grammar", type=Path, default=defaults.grammar)
    parser.add_argument("--locations", type=Path, default=defaults.locations,
                        help="location registry; omit to use the world's rooms")
    parser.add_argument("--patterns", type=Path, default=defaults.patterns)
    parser.add_argument("--backend", choices=("rule", "http"), default="rule")
    parser.add_argument("--endpoint", default=None, help="HTTP backend URL")
    parser.add_argument("--noise-sigma", type=float, default=0.0,
                        help="embedding noise level for perception")
    parser.add_argument("--pose-sigma", type=float, default=0.0)
    parser.add_argument("--rate", type=float, default=defaults.rate, help="loop Hz")
    parser.add_argument("--port", type=int, default=defaults.port, help="bridge port")
    parser.add_argument("--log", type=Path, default=None, help="interaction log path")
    parser.add_argument("--seed", type=int, default=defaults.seed)


def _config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    return ScenarioConfig(
        world=args.world,
        grammar=args.grammar,
        locations=args.locations,
        patterns=args.patterns,
        backend=args.backend,
        endpoint=args.endpoint,
        noise_sigma=args.noise_sigma,
        pose_sigma=args.pose_sigma,
        rate=args.rate,
        port=args.port,
        log_path=args.log,
        seed=args.seed,
    )


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    violations = config.validate()
    if violations:
        for v in violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2

    session = Session(config)
    bridge = Bridge(session.bus, port=config.port, world=session.world)
    try:
        bridge.start()
    except BridgeError as exc:
        print(f"bridge error: {exc}", file=sys.stderr)
        return 1

    stop_event = threading.Event()

    def _on_signal(signum, frame):
        stop_event.set()

    signal.signal(signal.SIGINT, _on_signal)
    signal.signal(signal.SIGTERM, _on_signal)

    print(f"session up: bridge on {bridge.url}, world {config.world.name}, "
          f"log {config.log_path or '(memory only)'}")
    try:
        session.run(duration=getattr(args, "duration", None), stop_event=stop_event)
    finally:
        session.shutdown()
        bridge.stop()
        print("session stopped; final stop command issued")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    violations = config.validate()
    if violations:
        for v in violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    try:
        report = evaluate_corpus(config, args.corpus, report_path=args.report,
                                 pipeline_delay=args.pipeline_delay)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(report.to_json(), end="")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    violations = config.validate()
    if violations:
        for v in violations:
            print(f"violation: {v}")
        print(f"{len(violations)} violation(s) found")
        return 2
    print("configuration clean")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chatnav",
        description="Chat-driven control stack for a simulated robot")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="start a live session with the bridge")
    _add_config_flags(p_run)
    p_run.add_argument("--duration", type=float, default=None,
                       help="stop after this many seconds (default: run forever)")
    p_run.set_defaults(func=cmd_run)

    p_eval = sub.add_parser("eval", help="run a corpus through the pipeline")
    _add_config_flags(p_eval)
    p_eval.add_argument("--corpus", type=Path, required=True,
                        help="JSON-lines corpus: {text, true_label, goal?}")
    p_eval.add_argument("--report", type=Path, default=None,
                        help="write the metrics report here")
    p_eval.add_argument("--pipeline-delay", type=float, default=0.0,
                        help="simulated processing delay per command (seconds)")
    p_eval.set_defaults(func=cmd_eval)

    p_val = sub.add_parser("validate", help="check config files")
    _add_config_flags(p_val)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 0
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
