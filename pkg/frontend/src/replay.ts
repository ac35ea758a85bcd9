/** Offline replay: fold a recorded trace file into the same final view a
 * live session would have reached. */

import {
  ServerMessage,
  SnapshotMessage,
  TraceMessage,
  moduleOf,
  traceLineToMessage,
} from "./protocol.js";
import { SessionState, apply, initialState } from "./state.js";

/** Engine trace lines carry output writes as slot_written events; lift the
 * ones on the output slot into output messages the way the live server does. */
export function messagesFromTraceLines(
  lines: Iterable<string>,
  outputSlot = "rawio:out",
): ServerMessage[] {
  const out: ServerMessage[] = [];
  for (const raw of lines) {
    const line = raw.trim();
    if (!line) {
      continue;
    }
    const message: TraceMessage = traceLineToMessage(line);
    out.push(message);
    const event = message.event;
    if (event.kind === "slot_written" && event.slot === outputSlot) {
      out.push({
        type: "output",
        text: String(event.value),
        rule: String(event.rule),
        tick: event.tick,
      });
    }
  }
  return out;
}

export function replay(
  snapshot: SnapshotMessage,
  traceLines: Iterable<string>,
): SessionState {
  let state = apply(initialState(), snapshot);
  for (const message of messagesFromTraceLines(traceLines)) {
    state = apply(state, message);
  }
  return state;
}

export function transcriptText(state: SessionState): string[] {
  return state.transcript.map((line) =>
    line.kind === "in" ? `you> ${line.text}` : `[${line.rule}] ${line.text}`);
}

export { moduleOf };
