/** Deterministic client-side layout of the signal-rule-slot diagram.
 *
 * Three columns (slots, signals, rules) with nodes ordered by name; edges
 * derived from the snapshot adjacency only.
 */

import { Graph } from "./protocol.js";

export interface NodePosition {
  id: string;
  kind: "slot" | "signal" | "rule";
  label: string;
  x: number;
  y: number;
}

export interface Edge {
  from: string;
  to: string;
  kind: "read" | "write" | "emit" | "emit-detached" | "condition" | "changed";
}

export interface Layout {
  nodes: NodePosition[];
  edges: Edge[];
  width: number;
  height: number;
}

const COLUMN_X = { slot: 80, signal: 320, rule: 560 };
const ROW_H = 56;
const TOP = 40;

export function layout(graph: Graph): Layout {
  const nodes: NodePosition[] = [];
  const slots = [...graph.slots].sort();
  const signals = [...graph.signals].sort();
  const rules = [...graph.rules].map((r) => r.name).sort();
  slots.forEach((name, i) => nodes.push(
    { id: `slot:${name}`, kind: "slot", label: name,
      x: COLUMN_X.slot, y: TOP + i * ROW_H }));
  signals.forEach((name, i) => nodes.push(
    { id: `sig:${name}`, kind: "signal", label: name,
      x: COLUMN_X.signal, y: TOP + i * ROW_H }));
  rules.forEach((name, i) => nodes.push(
    { id: `rule:${name}`, kind: "rule", label: name,
      x: COLUMN_X.rule, y: TOP + i * ROW_H }));

  const have = new Set(nodes.map((n) => n.id));
  const edges: Edge[] = [];
  const push = (from: string, to: string, kind: Edge["kind"]) => {
    if (have.has(from) && have.has(to)) {
      edges.push({ from, to, kind });
    }
  };
  for (const rule of graph.rules) {
    for (const slot of rule.reads) {
      push(`slot:${slot}`, `rule:${rule.name}`, "read");
    }
    for (const slot of rule.writes) {
      push(`rule:${rule.name}`, `slot:${slot}`, "write");
    }
    for (const emit of rule.emits) {
      push(`rule:${rule.name}`, `sig:${emit.sid}`,
           emit.detached ? "emit-detached" : "emit");
    }
    const conditioned = new Set<string>();
    for (const clause of rule.clauses) {
      for (const sid of clause) {
        conditioned.add(sid);
      }
    }
    for (const sid of [...conditioned].sort()) {
      push(`sig:${sid}`, `rule:${rule.name}`, "condition");
    }
  }
  for (const [slot, sid] of Object.entries(graph.changed)) {
    push(`slot:${slot}`, `sig:${sid}`, "changed");
  }
  const rows = Math.max(slots.length, signals.length, rules.length, 1);
  return { nodes, edges, width: 680, height: TOP + rows * ROW_H + 20 };
}
