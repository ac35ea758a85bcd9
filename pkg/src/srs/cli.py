"""Command-line entry points: scenario runner, REPL, DOT export, server.

Every flag has an ``SRS_``-prefixed environment variable fallback, e.g.
``SRS_SEED=7 srs --scenario demo.scn`` equals ``srs --seed 7 --scenario ...``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

from .agentkit import AgentConfig, build_demo_agent
from .scenario import run_scenario
from .scheduler import Context, EngineConfig, Runner
from .trace import TraceRecorder, export_dot

OUTPUT_SLOT = "rawio:out"
INPUT_SLOT = "rawio:in"


def _env(name: str, default=None):
    return os.environ.get(f"SRS_{name.upper().replace('-', '_')}", default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srs",
        description="Signal-rule-slot demo agent: scenarios, REPL, chatboard.")
    parser.add_argument("--scenario", default=_env("scenario"),
                        help="run a scenario file and exit")
    parser.add_argument("--deterministic", action="store_true",
                        default=_env("deterministic") is not None,
                        help="single-threaded, replayable execution")
    parser.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    parser.add_argument("--tick-hz", type=float,
                        default=float(_env("tick_hz", 20.0)))
    parser.add_argument("--timeout-ticks", type=int,
                        default=int(_env("timeout_ticks", 7)))
    parser.add_argument("--trace", default=_env("trace"),
                        help="write a JSONL trace to this path")
    parser.add_argument("--dot", default=_env("dot"),
                        help="export the agent diagram to this path")
    parser.add_argument("--serve", type=int,
                        default=int(_env("serve", 0)) or None,
                        help="serve the chatboard wire protocol on this port")
    return parser


def engine_from_args(args) -> EngineConfig:
    return EngineConfig(tick_hz=args.tick_hz,
                        timeout_ticks=args.timeout_ticks,
                        deterministic=args.deterministic,
                        seed=args.seed)


def repl(ctx: Context, runner: Runner,
         stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    echo_trace = [False]

    def on_event(event):
        if event.kind == "slot_written" and event.fields.get("slot") == OUTPUT_SLOT:
            print(f"[{event.fields.get('rule')}] {event.fields.get('value')}",
                  file=stdout, flush=True)
        elif echo_trace[0]:
            print(f"  .. {event.tick} {event.kind} {event.fields}",
                  file=stdout, flush=True)

    ctx.trace.add_listener(on_event)
    runner.start()
    print("srs agent ready. :quit to exit, :dot <file>, :utility, "
          ":trace on|off", file=stdout, flush=True)
    try:
        for line in stdin:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith(":"):
                parts = line.split()
                command = parts[0]
                if command == ":quit":
                    break
                elif command == ":utility":
                    for name, bits in ctx.utility_report():
                        print(f"  {bits:7.3f} bits  {name}", file=stdout)
                elif command == ":dot":
                    target = parts[1] if len(parts) > 1 else "agent.dot"
                    Path(target).write_text(export_dot(ctx), encoding="utf-8")
                    print(f"wrote {target}", file=stdout)
                elif command == ":trace":
                    echo_trace[0] = len(parts) > 1 and parts[1] == "on"
                else:
                    print(f"unknown command {command}", file=stdout)
                continue
            ctx.external_write(INPUT_SLOT, line)
    except KeyboardInterrupt:
        pass
    finally:
        runner.stop()
        ctx.trace.flush()
    return 0


def serve(ctx: Context, runner: Runner, port: int) -> int:
    import uvicorn

    from .server import make_app

    app = make_app(ctx)
    runner.start()
    try:
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    finally:
        runner.stop()
        ctx.trace.flush()
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    engine = engine_from_args(args)

    trace_stream = None
    if args.trace:
        trace_stream = open(args.trace, "w", encoding="utf-8")

    if args.scenario:
        result = run_scenario(Path(args.scenario), engine=engine,
                              trace_stream=trace_stream)
        for line in result.transcript:
            print(line)
        if trace_stream:
            trace_stream.close()
        if not result.ok:
            print(f"scenario failed: {result.failures[0]}", file=sys.stderr)
        return result.exit_code

    recorder = TraceRecorder(stream=trace_stream) if trace_stream else None
    ctx = build_demo_agent(engine, AgentConfig(), trace=recorder)

    if args.dot:
        Path(args.dot).write_text(export_dot(ctx), encoding="utf-8")
        print(f"wrote {args.dot}")
        if not args.serve:
            return 0

    runner = Runner(ctx)
    try:
        if args.serve:
            return serve(ctx, runner, args.serve)
        return repl(ctx, runner)
    finally:
        if trace_stream:
            trace_stream.close()


if __name__ == "__main__":
    raise SystemExit(main())
