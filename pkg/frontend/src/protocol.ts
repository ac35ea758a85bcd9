/** Wire protocol types and parsing for the engine's chatboard channel. */

export interface EmitDecl {
  sid: string;
  detached: boolean;
}

export interface RuleNode {
  name: string;
  reads: string[];
  writes: string[];
  emits: EmitDecl[];
  clauses: string[][];
}

export interface Graph {
  slots: string[];
  signals: string[];
  rules: RuleNode[];
  changed: Record<string, string>;
}

export interface SnapshotMessage {
  type: "snapshot";
  graph: Graph;
  dot?: string;
}

export interface TraceEventBody {
  seq: number;
  tick: number;
  kind: string;
  [key: string]: unknown;
}

export interface TraceMessage {
  type: "trace";
  event: TraceEventBody;
}

export interface OutputMessage {
  type: "output";
  text: string;
  rule: string;
  tick: number;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage =
  | SnapshotMessage
  | TraceMessage
  | OutputMessage
  | ErrorMessage;

export interface UtteranceMessage {
  type: "utterance";
  text: string;
}

export class ProtocolError extends Error {}

const SERVER_TYPES = new Set(["snapshot", "trace", "output", "error"]);

export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new ProtocolError("message is not JSON");
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new ProtocolError("message is not an object");
  }
  const type = (data as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) {
    throw new ProtocolError(`unknown message type ${String(type)}`);
  }
  const message = data as Record<string, unknown>;
  if (type === "snapshot" && typeof message.graph !== "object") {
    throw new ProtocolError("snapshot without graph");
  }
  if (type === "trace" && typeof message.event !== "object") {
    throw new ProtocolError("trace without event");
  }
  if (type === "output" && typeof message.text !== "string") {
    throw new ProtocolError("output without text");
  }
  if (type === "error" && typeof message.message !== "string") {
    throw new ProtocolError("error without message");
  }
  return data as ServerMessage;
}

export function utterance(text: string): string {
  const message: UtteranceMessage = { type: "utterance", text };
  return JSON.stringify(message);
}

/** Engine trace files are JSONL of raw events; lift each into a message. */
export function traceLineToMessage(line: string): TraceMessage {
  const event = JSON.parse(line) as TraceEventBody;
  if (typeof event.kind !== "string") {
    throw new ProtocolError("trace line without kind");
  }
  return { type: "trace", event };
}

export function moduleOf(ruleName: string): string {
  const i = ruleName.indexOf(":");
  return i < 0 ? ruleName : ruleName.slice(0, i);
}
