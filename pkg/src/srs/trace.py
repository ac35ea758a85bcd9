"""Structured event recording, replayable trace files, DOT export.

Events are emitted as one JSON object per line with keys in fixed order, so
deterministic runs produce byte-identical trace files. ``replay`` folds a
trace back into final slot values and rule-run counts; ``export_dot`` renders
the automaton's signal-rule-slot diagram.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, IO, Iterable, Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from .scheduler import Context

log = logging.getLogger("srs.trace")

EVENT_KINDS = frozenset({
    "spike_emitted", "spike_rejected", "spike_consumed", "activation_created",
    "spike_acquired", "pressured", "clock_expired", "consent_granted",
    "consent_denied", "rule_started", "rule_finished", "slot_written",
    "activity_changed",
})

_EXCERPT_LEN = 120


def excerpt(payload: Any) -> str:
    text = repr(payload)
    return text if len(text) <= _EXCERPT_LEN else text[:_EXCERPT_LEN] + "..."


@dataclass
class TraceEvent:
    """One engine lifecycle event.

    ``fields`` holds kind-specific subject identifiers; insertion order is
    preserved into the serialized form.
    """

    seq: int
    tick: int
    kind: str
    fields: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        record: dict[str, Any] = {"seq": self.seq, "tick": self.tick,
                                  "kind": self.kind}
        record.update(self.fields)
        return json.dumps(record, ensure_ascii=False, separators=(",", ":"),
                          default=repr)

    @classmethod
    def from_json(cls, line: str) -> "TraceEvent":
        data = json.loads(line)
        seq = data.pop("seq")
        tick = data.pop("tick")
        kind = data.pop("kind")
        return cls(seq, tick, kind, data)


class TraceRecorder:
    """Serializes events to an optional sink and fans out to listeners.

    A failing sink never stops the engine; the first failure is logged and
    further writes are dropped.
    """

    def __init__(self, stream: Optional[IO[str]] = None) -> None:
        self._stream = stream
        self._listeners: list[Callable[[TraceEvent], None]] = []
        self._seq = 0
        self._sink_broken = False
        self.events: list[TraceEvent] = []
        self.keep_events = stream is None

    def add_listener(self, fn: Callable[[TraceEvent], None]) -> None:
        self._listeners.append(fn)

    def record(self, tick: int, kind: str, **fields: Any) -> TraceEvent:
        assert kind in EVENT_KINDS, kind
        event = TraceEvent(self._seq, tick, kind, fields)
        self._seq += 1
        if self.keep_events:
            self.events.append(event)
        if self._stream is not None and not self._sink_broken:
            try:
                self._stream.write(event.to_json() + "\n")
            except OSError as exc:
                self._sink_broken = True
                log.error("trace sink failed, tracing disabled: %s", exc)
        for fn in self._listeners:
            fn(event)
        return event

    def flush(self) -> None:
        if self._stream is not None and not self._sink_broken:
            try:
                self._stream.flush()
            except OSError:
                self._sink_broken = True


@dataclass
class ReplayState:
    """State reconstructed from a trace: slot values and rule-run counts."""

    slots: dict[str, Any] = field(default_factory=dict)
    rule_runs: dict[str, int] = field(default_factory=dict)
    ticks: int = 0


def replay(lines: Iterable[str]) -> ReplayState:
    """Fold a JSONL trace into final slot values and total rule-run counts."""
    state = ReplayState()
    for line in lines:
        line = line.strip()
        if not line:
            continue
        event = TraceEvent.from_json(line)
        state.ticks = max(state.ticks, event.tick)
        if event.kind == "slot_written":
            state.slots[event.fields["slot"]] = event.fields.get("value")
        elif event.kind == "rule_started":
            rule = event.fields["rule"]
            state.rule_runs[rule] = state.rule_runs.get(rule, 0) + 1
    return state


def _quote(name: str) -> str:
    return '"' + name.replace('"', '\\"') + '"'


def export_dot(ctx: "Context") -> str:
    """Render the context's signal-rule-slot diagram as DOT text.

    Local convention for the diagram legend:

    - slots: ``box``; signals: ``ellipse``; rules: rounded ``box``
    - rule reads slot: dotted gray edge slot -> rule
    - rule writes slot: solid edge rule -> slot
    - rule emits signal: solid open-arrow edge rule -> signal (dashed when
      the emission is detached); slots emit their changed-signal the same way
    - condition membership: edge signal -> rule, via an ``&`` junction for
      conjunctions and a ``v`` junction for disjunctions

    Signals that are never referenced (no condition, tail, or emission) are
    omitted to keep diagrams readable.
    """
    lines = ["digraph srs {", "  rankdir=LR;"]

    referenced: set[str] = set()
    for rule in ctx.rules:
        for clause in ctx.completed[rule.name]:
            for lit in clause:
                referenced.add(lit.sid)
                referenced.update(t.sid for t in lit.tail)
        for emit in rule.emits:
            referenced.add(emit.sid)

    shown_slots = [name for name in sorted(ctx.slots)
                   if any(name in r.read_slots or name in r.write_slots
                          for r in ctx.rules)
                   or ctx.slots[name].changed_sid in referenced]
    for name in shown_slots:
        lines.append(f"  {_quote('slot:' + name)} [label={_quote(name)}, shape=box];")
    for sid in sorted(referenced):
        if sid in ctx.signals:
            lines.append(f"  {_quote('sig:' + sid)} [label={_quote(sid)}, shape=ellipse];")

    for rule in ctx.rules:
        rname = "rule:" + rule.name
        lines.append(f"  {_quote(rname)} [label={_quote(rule.name)}, "
                     "shape=box, style=rounded];")
        for slot in sorted(rule.read_slots):
            lines.append(f"  {_quote('slot:' + slot)} -> {_quote(rname)} "
                         "[style=dotted, color=gray];")
        for slot in sorted(rule.write_slots):
            lines.append(f"  {_quote(rname)} -> {_quote('slot:' + slot)};")
        for emit in sorted(rule.emits, key=lambda e: e.sid):
            style = ", style=dashed" if emit.detached else ""
            lines.append(f"  {_quote(rname)} -> {_quote('sig:' + emit.sid)} "
                         f"[arrowhead=empty{style}];")

    for name in shown_slots:
        sid = ctx.slots[name].changed_sid
        if sid in referenced:
            lines.append(f"  {_quote('slot:' + name)} -> {_quote('sig:' + sid)} "
                         "[arrowhead=empty];")

    for rule in ctx.rules:
        rname = "rule:" + rule.name
        clauses = ctx.completed[rule.name]
        targets = []
        for ci, clause in enumerate(clauses):
            sids = sorted({lit.sid for lit in clause})
            if len(sids) == 1:
                targets.append(("sig:" + sids[0], None))
                continue
            junction = f"and:{rule.name}:{ci}"
            lines.append(f"  {_quote(junction)} [label=\"&\", shape=diamond];")
            for sid in sids:
                lines.append(f"  {_quote('sig:' + sid)} -> {_quote(junction)};")
            targets.append((junction, None))
        if len(targets) == 1:
            lines.append(f"  {_quote(targets[0][0])} -> {_quote(rname)};")
        elif len(targets) > 1:
            junction = f"or:{rule.name}"
            lines.append(f"  {_quote(junction)} [label=\"v\", shape=diamond];")
            for node, _ in targets:
                lines.append(f"  {_quote(node)} -> {_quote(junction)};")
            lines.append(f"  {_quote(junction)} -> {_quote(rname)};")

    lines.append("}")
    return "\n".join(lines) + "\n"
