"""Command line entry points: run, serve, memdump."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .gateway import SessionConfig, run_scenario, serve
from .memory import MemoryStore, format_forest


def _parse_listen(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {value!r}")
    return host, int(port)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario", type=Path)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--speed", type=float, default=0.0,
                   help="real-time multiplier; 0 replays as fast as possible")
    p.add_argument("--backend", default=None,
                   help="mock or remote:HOST:PORT (default: $STREAMCLAW_BACKEND or mock)")
    p.add_argument("--transcript", type=Path, default=None)
    p.add_argument("--signal-log", type=Path, default=None)
    p.add_argument("--memory-log", type=Path, default=None)


def _session_config(args) -> SessionConfig:
    return SessionConfig(
        scenario_path=args.scenario,
        config_path=args.config,
        speed=args.speed,
        backend_spec=args.backend,
        transcript_path=args.transcript,
        signal_log_path=args.signal_log,
        memory_log_path=args.memory_log,
        listen=getattr(args, "listen", None),
        start_paused=getattr(args, "start_paused", False),
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="streamclaw")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="replay a scenario and write the transcript")
    _add_common(run_p)

    serve_p = sub.add_parser("serve", help="replay a scenario while serving the gateway protocol")
    _add_common(serve_p)
    serve_p.add_argument("--listen", type=_parse_listen, required=True, metavar="HOST:PORT")
    serve_p.add_argument("--start-paused", action="store_true",
                         help="wait for a resume message before replaying")

    dump_p = sub.add_parser("memdump", help="print the memory forest from a mutation log")
    dump_p.add_argument("log", type=Path)

    args = parser.parse_args(argv)
    if args.command == "run":
        return run_scenario(_session_config(args))
    if args.command == "serve":
        return serve(_session_config(args))
    store = MemoryStore.replay(args.log.read_text().splitlines())
    try:
        print(format_forest(store))
    except BrokenPipeError:  # e.g. memdump | head
        sys.stderr.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
