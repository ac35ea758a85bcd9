"""Scripted scenario runner: line-oriented directives with assertions.

Directive reference::

    # comment                lines starting with # (or blank) are skipped
    seed N                   set the engine seed (before any action)
    say <text>               write the input slot, then advance one tick
    tick N                   advance N ticks
    expect-output <regex>    the next output write's text must match
    expect-rule <regex>      the next output write's rule must match
    expect-silent N          advance N ticks; no output write may occur

Runs are deterministic: same scenario + seed = same transcript and trace.
``expect-output``/``expect-rule`` each consume one output write, ticking
until it arrives (bounded wait).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

from .agentkit import AgentConfig, build_demo_agent
from .errors import ScenarioError
from .scheduler import Context, EngineConfig

INPUT_SLOT = "rawio:in"
OUTPUT_SLOT = "rawio:out"

DIRECTIVES = ("seed", "say", "tick", "expect-output", "expect-rule",
              "expect-silent")


@dataclass
class Directive:
    line_no: int
    name: str
    arg: str


@dataclass
class Failure:
    line_no: int
    directive: str
    tick: int
    message: str

    def __str__(self) -> str:
        return (f"line {self.line_no} [{self.directive}] at tick {self.tick}: "
                f"{self.message}")


@dataclass
class ScenarioResult:
    ok: bool
    transcript: list[str] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)
    ticks: int = 0
    context: Optional[Context] = None

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


def parse_scenario(text: str) -> list[Directive]:
    directives = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        name = parts[0]
        arg = parts[1] if len(parts) > 1 else ""
        if name not in DIRECTIVES:
            raise ScenarioError(f"line {i}: unknown directive {name!r}")
        if name in ("seed", "tick", "expect-silent"):
            if not arg.strip().isdigit():
                raise ScenarioError(f"line {i}: {name} needs an integer")
        if name in ("say", "expect-output", "expect-rule") and not arg:
            raise ScenarioError(f"line {i}: {name} needs an argument")
        directives.append(Directive(i, name, arg))
    return directives


class ScenarioRun:
    """Drives one context through a parsed scenario."""

    def __init__(self, ctx: Context, max_wait_ticks: int = 64) -> None:
        self.ctx = ctx
        self.max_wait_ticks = max_wait_ticks
        self.pending: list[tuple[int, str, str]] = []  # (tick, rule, text)
        ctx.trace.add_listener(self._on_event)
        self.result = ScenarioResult(ok=True)

    def _on_event(self, event) -> None:
        if event.kind == "slot_written" and event.fields.get("slot") == OUTPUT_SLOT:
            entry = (event.tick, event.fields.get("rule"),
                     str(event.fields.get("value")))
            self.pending.append(entry)
            self.result.transcript.append(
                f"[{entry[1]}] {entry[2]}")

    def _tick(self, n: int = 1) -> None:
        for _ in range(n):
            self.ctx.run_tick()
            self.result.ticks = self.ctx.tick

    def _fail(self, d: Directive, message: str) -> None:
        failure = Failure(d.line_no, d.name, self.ctx.tick, message)
        self.result.failures.append(failure)
        self.result.ok = False
        self.result.transcript.append(f"FAIL {failure}")

    def _next_output(self, d: Directive) -> Optional[tuple[int, str, str]]:
        waited = 0
        while not self.pending and waited < self.max_wait_ticks:
            self._tick()
            waited += 1
        if not self.pending:
            self._fail(d, f"no output within {self.max_wait_ticks} ticks")
            return None
        return self.pending.pop(0)

    def run(self, directives: Iterable[Directive]) -> ScenarioResult:
        for d in directives:
            if not self.result.ok:
                break
            if d.name == "seed":
                continue  # consumed at context construction
            if d.name == "say":
                self.result.transcript.append(f"you> {d.arg}")
                self.ctx.external_write(INPUT_SLOT, d.arg)
                self._tick()
            elif d.name == "tick":
                self._tick(int(d.arg))
            elif d.name == "expect-silent":
                for _ in range(int(d.arg)):
                    self._tick()
                    if self.pending:
                        got = self.pending.pop(0)
                        self._fail(d, f"unexpected output {got[2]!r} "
                                      f"from {got[1]}")
                        break
            elif d.name == "expect-output":
                got = self._next_output(d)
                if got is not None and not re.search(d.arg, got[2]):
                    self._fail(d, f"output {got[2]!r} does not match {d.arg!r}")
            elif d.name == "expect-rule":
                got = self._next_output(d)
                if got is not None and not re.search(d.arg, got[1]):
                    self._fail(d, f"rule {got[1]!r} does not match {d.arg!r}")
        return self.result


def scenario_seed(directives: Iterable[Directive], default: int = 0) -> int:
    for d in directives:
        if d.name == "seed":
            return int(d.arg)
    return default


def run_scenario(source: Union[str, Path],
                 engine: Optional[EngineConfig] = None,
                 agent: Optional[AgentConfig] = None,
                 ctx_factory: Optional[Callable[[EngineConfig], Context]] = None,
                 trace_stream=None,
                 max_wait_ticks: int = 64) -> ScenarioResult:
    """Run a scenario file (or literal text) against the demo agent.

    Scenarios always run deterministically; the directive seed wins over the
    engine config's.
    """
    path = Path(source)
    text = path.read_text(encoding="utf-8") if path.exists() else str(source)
    directives = parse_scenario(text)
    engine = engine or EngineConfig()
    engine.deterministic = True
    engine.seed = scenario_seed(directives, engine.seed)
    if ctx_factory is not None:
        ctx = ctx_factory(engine)
    else:
        ctx = build_demo_agent(engine, agent)
    if trace_stream is not None:
        ctx.trace._stream = trace_stream
    run = ScenarioRun(ctx, max_wait_ticks=max_wait_ticks)
    result = run.run(directives)
    result.context = ctx
    return result
