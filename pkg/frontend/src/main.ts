/** Browser entry: live chat plus the spike/activation inspector. */

import { parseServerMessage, utterance } from "./protocol.js";
import {
  SessionState,
  apply,
  disconnected,
  initialState,
  localUtterance,
} from "./state.js";
import { layout } from "./graph.js";
import { moduleColor } from "./colors.js";

const FLASH_TICKS = 3;

class Board {
  state: SessionState = initialState();
  socket: WebSocket | null = null;
  pendingRender = false;

  constructor(
    private transcriptEl: HTMLElement,
    private graphEl: HTMLElement,
    private statusEl: HTMLElement,
    private errorEl: HTMLElement,
  ) {}

  connect(url: string): void {
    const socket = new WebSocket(url);
    this.socket = socket;
    socket.onmessage = (event) => {
      try {
        this.state = apply(this.state, parseServerMessage(String(event.data)));
      } catch (err) {
        console.warn("unparseable message", err);
        return;
      }
      if (this.state.ignored > 0) {
        console.warn(`${this.state.ignored} events referenced unknown nodes`);
      }
      this.scheduleRender();
    };
    socket.onclose = () => {
      this.state = disconnected(this.state);
      this.scheduleRender();
      setTimeout(() => this.connect(url), 1500);
    };
    socket.onerror = () => socket.close();
  }

  send(text: string): void {
    if (!this.socket || this.socket.readyState !== WebSocket.OPEN) {
      this.state = apply(this.state, {
        type: "error",
        message: "not connected; utterance discarded",
      });
      this.scheduleRender();
      return;
    }
    this.socket.send(utterance(text));
    this.state = localUtterance(this.state, text);
    this.scheduleRender();
  }

  /** Batch renders so a burst of events within one tick paints once. */
  scheduleRender(): void {
    if (this.pendingRender) {
      return;
    }
    this.pendingRender = true;
    requestAnimationFrame(() => {
      this.pendingRender = false;
      this.render();
    });
  }

  render(): void {
    this.statusEl.textContent = this.state.connected
      ? `connected · tick ${this.state.lastTick} · activity ${this.state.activity}`
      : "disconnected";
    this.renderTranscript();
    this.renderGraph();
    this.errorEl.textContent = this.state.errors[this.state.errors.length - 1] ?? "";
  }

  renderTranscript(): void {
    const el = this.transcriptEl;
    el.textContent = "";
    for (const line of this.state.transcript) {
      const div = document.createElement("div");
      div.className = `line ${line.kind}`;
      if (line.kind === "out") {
        const chip = document.createElement("span");
        chip.className = "chip";
        chip.textContent = line.module ?? "?";
        chip.style.background = line.color ?? "#888";
        div.appendChild(chip);
      }
      const span = document.createElement("span");
      span.textContent = line.text;
      div.appendChild(span);
      el.appendChild(div);
    }
    el.scrollTop = el.scrollHeight;
  }

  renderGraph(): void {
    const graph = this.state.graph;
    const el = this.graphEl;
    el.textContent = "";
    if (!graph) {
      return;
    }
    const plan = layout(graph);
    const ns = "http://www.w3.org/2000/svg";
    const svg = document.createElementNS(ns, "svg");
    svg.setAttribute("viewBox", `0 0 ${plan.width} ${plan.height}`);
    const at = new Map(plan.nodes.map((n) => [n.id, n]));
    for (const edge of plan.edges) {
      const a = at.get(edge.from);
      const b = at.get(edge.to);
      if (!a || !b) {
        continue;
      }
      const path = document.createElementNS(ns, "line");
      path.setAttribute("x1", String(a.x));
      path.setAttribute("y1", String(a.y));
      path.setAttribute("x2", String(b.x));
      path.setAttribute("y2", String(b.y));
      path.setAttribute("class", `edge ${edge.kind}`);
      svg.appendChild(path);
    }
    const spikesBySid = new Map<string, number>();
    for (const badge of Object.values(this.state.spikes)) {
      spikesBySid.set(badge.sid, (spikesBySid.get(badge.sid) ?? 0) + 1);
    }
    const clocksByRule = new Map<string, number>();
    const holdersByRule = new Map<string, number>();
    for (const act of Object.values(this.state.activations)) {
      if (act.spikes.length) {
        holdersByRule.set(act.rule, (holdersByRule.get(act.rule) ?? 0) + 1);
      }
      for (const clock of act.clocks) {
        const left = Math.max(
          0, clock.remaining - (this.state.lastTick - clock.sinceTick));
        clocksByRule.set(
          act.rule, Math.min(clocksByRule.get(act.rule) ?? Infinity, left));
      }
    }
    for (const node of plan.nodes) {
      const g = document.createElementNS(ns, "g");
      const shape = document.createElementNS(
        ns, node.kind === "signal" ? "ellipse" : "rect");
      if (node.kind === "signal") {
        shape.setAttribute("cx", String(node.x));
        shape.setAttribute("cy", String(node.y));
        shape.setAttribute("rx", "70");
        shape.setAttribute("ry", "16");
      } else {
        shape.setAttribute("x", String(node.x - 70));
        shape.setAttribute("y", String(node.y - 14));
        shape.setAttribute("width", "140");
        shape.setAttribute("height", "28");
        if (node.kind === "rule") {
          shape.setAttribute("rx", "10");
          const module = node.label.split(":")[0] ?? "";
          shape.setAttribute("stroke", moduleColor(module));
          const flashedAt = this.state.flashes[node.label];
          if (flashedAt !== undefined &&
              this.state.lastTick - flashedAt <= FLASH_TICKS) {
            shape.setAttribute("class", "flash");
          }
        }
      }
      g.appendChild(shape);
      const text = document.createElementNS(ns, "text");
      text.setAttribute("x", String(node.x));
      text.setAttribute("y", String(node.y + 4));
      text.textContent = node.label;
      g.appendChild(text);
      if (node.kind === "signal") {
        const count = spikesBySid.get(node.label) ?? 0;
        if (count > 0) {
          const badge = document.createElementNS(ns, "text");
          badge.setAttribute("x", String(node.x + 62));
          badge.setAttribute("y", String(node.y - 12));
          badge.setAttribute("class", "badge");
          badge.textContent = `●${count}`;
          g.appendChild(badge);
        }
      }
      if (node.kind === "rule") {
        const holders = holdersByRule.get(node.label) ?? 0;
        const clock = clocksByRule.get(node.label);
        const bits: string[] = [];
        if (holders) {
          bits.push(`◦${holders}`);
        }
        if (clock !== undefined) {
          bits.push(`⏱${clock}`);
        }
        if (bits.length) {
          const badge = document.createElementNS(ns, "text");
          badge.setAttribute("x", String(node.x + 62));
          badge.setAttribute("y", String(node.y - 12));
          badge.setAttribute("class", "badge");
          badge.textContent = bits.join(" ");
          g.appendChild(badge);
        }
      }
      svg.appendChild(g);
    }
    el.appendChild(svg);
  }
}

export function start(): void {
  const board = new Board(
    document.getElementById("transcript")!,
    document.getElementById("graph")!,
    document.getElementById("status")!,
    document.getElementById("errors")!,
  );
  const input = document.getElementById("say") as HTMLInputElement;
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && input.value.trim()) {
      board.send(input.value.trim());
      input.value = "";
    }
  });
  const url = `ws://${location.hostname}:${location.port || 8000}/ws`;
  board.connect(url);
}

if (typeof document !== "undefined" && document.getElementById("transcript")) {
  start();
}
