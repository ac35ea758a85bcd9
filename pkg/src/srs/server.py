"""Wire protocol for the chatboard: JSON messages over a WebSocket.

Message types:

- client -> server: ``{"type": "utterance", "text": ...}``
- server -> client: ``{"type": "snapshot", "graph": ..., "dot": ...}`` once
  on connect, then ``{"type": "trace", "event": ...}`` for every engine
  event and ``{"type": "output", "text", "rule", "tick"}`` for output-slot
  writes. Malformed input gets ``{"type": "error", "message": ...}`` and the
  connection stays open.

The engine never awaits the network: events are fanned out with
``put_nowait`` into bounded per-client queues; a stalled client just loses
events.
"""

from __future__ import annotations

import asyncio
import json
import logging
from typing import Any, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .scheduler import Context
from .trace import TraceEvent, export_dot

log = logging.getLogger("srs.server")

INPUT_SLOT = "rawio:in"
OUTPUT_SLOT = "rawio:out"
MAX_MESSAGE_BYTES = 64 * 1024
_TEXT_CAP = 2048


def _cap(text: Any) -> str:
    text = str(text)
    return text if len(text) <= _TEXT_CAP else text[:_TEXT_CAP] + "..."


def snapshot_graph(ctx: Context) -> dict:
    """Adjacency form of the signal-rule-slot diagram for client layout."""
    ctx.prepare()
    referenced = set()
    rules = []
    for rule in ctx.rules:
        clauses = []
        for clause in ctx.completed[rule.name]:
            sids = sorted({lit.sid for lit in clause})
            referenced.update(sids)
            clauses.append(sids)
        for emit in rule.emits:
            referenced.add(emit.sid)
        rules.append({
            "name": rule.name,
            "reads": sorted(rule.read_slots),
            "writes": sorted(rule.write_slots),
            "emits": [{"sid": e.sid, "detached": e.detached}
                      for e in sorted(rule.emits, key=lambda e: e.sid)],
            "clauses": clauses,
        })
    slots = sorted(
        name for name in ctx.slots
        if any(name in r.read_slots or name in r.write_slots
               for r in ctx.rules)
        or ctx.slots[name].changed_sid in referenced)
    signals = sorted(s for s in referenced if s in ctx.signals)
    return {"slots": slots, "signals": signals, "rules": rules,
            "changed": {name: ctx.slots[name].changed_sid for name in slots}}


def wire_trace(event: TraceEvent) -> dict:
    body = {"seq": event.seq, "tick": event.tick, "kind": event.kind}
    for key, value in event.fields.items():
        body[key] = _cap(value) if key in ("payload", "value") else value
    return {"type": "trace", "event": body}


class Hub:
    """Fans engine events out to connected clients without blocking."""

    def __init__(self, queue_size: int = 512) -> None:
        self.queue_size = queue_size
        self._clients: dict[int, tuple[asyncio.Queue, asyncio.AbstractEventLoop]] = {}
        self._next_id = 0
        self.dropped = 0

    def register(self, loop: asyncio.AbstractEventLoop) -> tuple[int, asyncio.Queue]:
        self._next_id += 1
        queue: asyncio.Queue = asyncio.Queue(maxsize=self.queue_size)
        self._clients[self._next_id] = (queue, loop)
        return self._next_id, queue

    def unregister(self, client_id: int) -> None:
        self._clients.pop(client_id, None)

    def publish(self, message: dict) -> None:
        """Called from the engine thread; never blocks."""
        payload = json.dumps(message, ensure_ascii=False, default=repr)
        if len(payload.encode("utf-8")) > MAX_MESSAGE_BYTES:
            log.warning("dropping oversized wire message (%s)", message.get("type"))
            return
        for client_id, (queue, loop) in list(self._clients.items()):
            def offer(q=queue):
                try:
                    q.put_nowait(payload)
                except asyncio.QueueFull:
                    self.dropped += 1
            try:
                loop.call_soon_threadsafe(offer)
            except RuntimeError:
                self.unregister(client_id)


def attach_hub(ctx: Context, hub: Hub) -> None:
    """Stream every trace event (plus output writes) through the hub."""

    def on_event(event: TraceEvent) -> None:
        hub.publish(wire_trace(event))
        if event.kind == "slot_written" and event.fields.get("slot") == OUTPUT_SLOT:
            hub.publish({"type": "output",
                         "text": _cap(event.fields.get("value")),
                         "rule": event.fields.get("rule"),
                         "tick": event.tick})

    ctx.trace.add_listener(on_event)


def make_app(ctx: Context, hub: Optional[Hub] = None) -> FastAPI:
    """The chatboard endpoint; ticking the context is the caller's concern."""
    app = FastAPI(title="srs chatboard")
    app.state.hub = hub or Hub()
    app.state.ctx = ctx
    attach_hub(ctx, app.state.hub)

    @app.get("/health")
    def health() -> dict:
        return {"tick": ctx.tick, "rules": len(ctx.rules)}

    @app.websocket("/ws")
    async def ws(socket: WebSocket) -> None:
        await socket.accept()
        loop = asyncio.get_running_loop()
        client_id, queue = app.state.hub.register(loop)
        await socket.send_text(json.dumps({
            "type": "snapshot",
            "graph": snapshot_graph(ctx),
            "dot": export_dot(ctx),
        }, ensure_ascii=False))

        async def pump() -> None:
            while True:
                payload = await queue.get()
                await socket.send_text(payload)

        sender = asyncio.create_task(pump())
        try:
            while True:
                raw = await socket.receive_text()
                try:
                    message = json.loads(raw)
                    if not isinstance(message, dict):
                        raise ValueError("message must be an object")
                    if message.get("type") != "utterance":
                        raise ValueError(f"unsupported type {message.get('type')!r}")
                    text = str(message.get("text", ""))
                except (ValueError, json.JSONDecodeError) as exc:
                    await socket.send_text(json.dumps(
                        {"type": "error", "message": str(exc)}))
                    continue
                ctx.external_write(INPUT_SLOT, text)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            app.state.hub.unregister(client_id)

    return app
