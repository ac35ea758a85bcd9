/** Session view state: a pure fold over (snapshot, trace/output stream).
 *
 * The view is derived solely from received messages; there is no client-side
 * simulation, so replaying a recorded stream reproduces the exact view.
 */

import {
  Graph,
  ServerMessage,
  TraceEventBody,
  moduleOf,
} from "./protocol.js";
import { moduleColor } from "./colors.js";

export interface TranscriptLine {
  kind: "in" | "out" | "info";
  text: string;
  rule?: string;
  module?: string;
  color?: string;
  tick?: number;
}

export interface SpikeBadge {
  id: number;
  sid: string;
  tick: number;
}

export interface ClockBadge {
  group: number;
  remaining: number;
  sinceTick: number;
}

export interface ActivationBadge {
  id: number;
  rule: string;
  spikes: number[];
  clocks: ClockBadge[];
}

export interface SessionState {
  connected: boolean;
  graph: Graph | null;
  transcript: TranscriptLine[];
  spikes: Record<number, SpikeBadge>;
  activations: Record<number, ActivationBadge>;
  flashes: Record<string, number>; // rule -> tick of last start
  slotValues: Record<string, string>;
  activity: number;
  errors: string[];
  ignored: number; // events referencing unknown nodes
  lastTick: number;
}

export function initialState(): SessionState {
  return {
    connected: false,
    graph: null,
    transcript: [],
    spikes: {},
    activations: {},
    flashes: {},
    slotValues: {},
    activity: 0,
    errors: [],
    ignored: 0,
    lastTick: 0,
  };
}

function knownSignal(graph: Graph | null, sid: unknown): boolean {
  return !!graph && typeof sid === "string" && graph.signals.includes(sid);
}

function knownRule(graph: Graph | null, rule: unknown): boolean {
  return !!graph && typeof rule === "string" &&
    graph.rules.some((r) => r.name === rule);
}

function applyTrace(state: SessionState, event: TraceEventBody): SessionState {
  const next: SessionState = { ...state, lastTick: Math.max(state.lastTick, event.tick) };
  switch (event.kind) {
    case "spike_emitted": {
      if (!knownSignal(state.graph, event.sid)) {
        return { ...next, ignored: next.ignored + 1 };
      }
      const id = event.spike as number;
      next.spikes = {
        ...state.spikes,
        [id]: { id, sid: event.sid as string, tick: event.tick },
      };
      return next;
    }
    case "spike_consumed":
    case "spike_rejected": {
      const id = event.spike as number;
      if (!(id in state.spikes)) {
        return next;
      }
      const spikes = { ...state.spikes };
      delete spikes[id];
      next.spikes = spikes;
      return next;
    }
    case "activation_created": {
      if (!knownRule(state.graph, event.rule)) {
        return { ...next, ignored: next.ignored + 1 };
      }
      const id = event.act as number;
      next.activations = {
        ...state.activations,
        [id]: { id, rule: event.rule as string, spikes: [], clocks: [] },
      };
      return next;
    }
    case "spike_acquired": {
      const id = event.act as number;
      const badge = state.activations[id];
      if (!badge) {
        return next;
      }
      next.activations = {
        ...state.activations,
        [id]: { ...badge, spikes: [...badge.spikes, event.spike as number] },
      };
      return next;
    }
    case "pressured": {
      const id = event.act as number;
      const badge = state.activations[id];
      if (!badge) {
        return next;
      }
      const clock: ClockBadge = {
        group: event.group as number,
        remaining: event.timeout as number,
        sinceTick: event.tick,
      };
      next.activations = {
        ...state.activations,
        [id]: { ...badge, clocks: [...badge.clocks, clock] },
      };
      return next;
    }
    case "clock_expired": {
      const id = event.act as number;
      const badge = state.activations[id];
      if (!badge) {
        return next;
      }
      next.activations = {
        ...state.activations,
        [id]: {
          ...badge,
          clocks: badge.clocks.filter((c) => c.group !== (event.group as number)),
        },
      };
      return next;
    }
    case "rule_started": {
      if (!knownRule(state.graph, event.rule)) {
        return { ...next, ignored: next.ignored + 1 };
      }
      next.flashes = { ...state.flashes, [event.rule as string]: event.tick };
      return next;
    }
    case "rule_finished": {
      const id = event.act as number;
      if (!(id in state.activations)) {
        return next;
      }
      const activations = { ...state.activations };
      delete activations[id];
      next.activations = activations;
      return next;
    }
    case "slot_written": {
      next.slotValues = {
        ...state.slotValues,
        [event.slot as string]: String(event.value),
      };
      return next;
    }
    case "activity_changed": {
      next.activity = event.value as number;
      return next;
    }
    default:
      return next;
  }
}

export function apply(state: SessionState, message: ServerMessage): SessionState {
  switch (message.type) {
    case "snapshot":
      // a (re)connect rebuilds the whole view; no stale badges survive
      return {
        ...initialState(),
        connected: true,
        graph: message.graph,
        transcript: state.transcript,
        errors: state.errors,
      };
    case "trace":
      return applyTrace(state, message.event);
    case "output": {
      const module = moduleOf(message.rule);
      const line: TranscriptLine = {
        kind: "out",
        text: message.text,
        rule: message.rule,
        module,
        color: moduleColor(module),
        tick: message.tick,
      };
      return { ...state, transcript: [...state.transcript, line] };
    }
    case "error":
      return { ...state, errors: [...state.errors, message.message] };
  }
}

/** Local echo for a sent utterance (right-aligned in the transcript). */
export function localUtterance(state: SessionState, text: string): SessionState {
  const line: TranscriptLine = { kind: "in", text };
  return { ...state, transcript: [...state.transcript, line] };
}

export function disconnected(state: SessionState): SessionState {
  return { ...state, connected: false };
}

export function foldMessages(
  state: SessionState,
  messages: Iterable<ServerMessage>,
): SessionState {
  let current = state;
  for (const message of messages) {
    current = apply(current, message);
  }
  return current;
}
