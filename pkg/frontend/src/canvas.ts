/** Canvas drawing and pointer interaction for the wireframe editor. */

import type { EditableWireframe, EditorState, Junction } from "./types.js";
import { snap } from "./state.js";

export type Tool = "select" | "junction" | "segment" | "delete";

export interface CanvasCallbacks {
  addJunction(x: number, y: number): void;
  moveJunction(id: number, x: number, y: number): void;
  deleteJunction(id: number): void;
  addSegment(a: number, b: number): void;
  deleteSegment(id: number): void;
  select(junctions: number[], segments: number[]): void;
}

const JUNCTION_RADIUS = 5;
const PICK_RADIUS = 8;

export class EditorCanvas {
  tool: Tool = "junction";
  snapEnabled = true;
  private dragging: { id: number } | null = null;
  private pendingEndpoint: number | null = null;
  private ctx: CanvasRenderingContext2D;

  constructor(
    private canvas: HTMLCanvasElement,
    private callbacks: CanvasCallbacks,
    private getState: () => EditorState,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas unavailable");
    this.ctx = ctx;
    canvas.addEventListener("pointerdown", (e) => this.onDown(e));
    canvas.addEventListener("pointermove", (e) => this.onMove(e));
    canvas.addEventListener("pointerup", (e) => this.onUp(e));
  }

  private toCanvasCoords(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const [w, h] = this.getState().wireframe.size;
    const x = ((e.clientX - rect.left) / rect.width) * w;
    const y = ((e.clientY - rect.top) / rect.height) * h;
    return [snap(x, this.snapEnabled), snap(y, this.snapEnabled)];
  }

  private pickJunction(x: number, y: number): Junction | null {
    let best: Junction | null = null;
    let bestDist = PICK_RADIUS;
    for (const j of this.getState().wireframe.junctions) {
      const d = Math.hypot(j.x - x, j.y - y);
      if (d < bestDist) {
        best = j;
        bestDist = d;
      }
    }
    return best;
  }

  private pickSegment(x: number, y: number): number | null {
    const wf = this.getState().wireframe;
    const byId = new Map(wf.junctions.map((j) => [j.id, j]));
    for (const s of wf.segments) {
      const a = byId.get(s.a);
      const b = byId.get(s.b);
      if (!a || !b) continue;
      const len2 = (b.x - a.x) ** 2 + (b.y - a.y) ** 2;
      const t =
        len2 === 0
          ? 0
          : Math.max(0, Math.min(1, ((x - a.x) * (b.x - a.x) + (y - a.y) * (b.y - a.y)) / len2));
      const d = Math.hypot(x - (a.x + t * (b.x - a.x)), y - (a.y + t * (b.y - a.y)));
      if (d <= 4) return s.id;
    }
    return null;
  }

  private onDown(e: PointerEvent): void {
    const [x, y] = this.toCanvasCoords(e);
    const hit = this.pickJunction(x, y);
    if (this.tool === "junction") {
      if (hit) {
        this.dragging = { id: hit.id };
      } else {
        this.callbacks.addJunction(x, y);
      }
    } else if (this.tool === "select") {
      if (hit) {
        this.dragging = { id: hit.id };
        this.callbacks.select([hit.id], []);
      } else {
        const seg = this.pickSegment(x, y);
        this.callbacks.select([], seg === null ? [] : [seg]);
      }
    } else if (this.tool === "segment") {
      if (!hit) return;
      if (this.pendingEndpoint === null) {
        this.pendingEndpoint = hit.id;
        this.callbacks.select([hit.id], []);
      } else {
        this.callbacks.addSegment(this.pendingEndpoint, hit.id);
        this.pendingEndpoint = null;
      }
    } else if (this.tool === "delete") {
      if (hit) {
        this.callbacks.deleteJunction(hit.id);
      } else {
        const seg = this.pickSegment(x, y);
        if (seg !== null) this.callbacks.deleteSegment(seg);
      }
    }
    this.draw();
  }

  private onMove(e: PointerEvent): void {
    if (!this.dragging) return;
    const [x, y] = this.toCanvasCoords(e);
    this.callbacks.moveJunction(this.dragging.id, x, y);
    this.draw();
  }

  private onUp(_e: PointerEvent): void {
    this.dragging = null;
  }

  resetPending(): void {
    this.pendingEndpoint = null;
  }

  draw(): void {
    const state = this.getState();
    const wf: EditableWireframe = state.wireframe;
    const [w, h] = wf.size;
    const sx = this.canvas.width / w;
    const sy = this.canvas.height / h;
    const ctx = this.ctx;
    ctx.fillStyle = "#11131a";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);

    const byId = new Map(wf.junctions.map((j) => [j.id, j]));
    ctx.lineWidth = 2;
    for (const s of wf.segments) {
      const a = byId.get(s.a);
      const b = byId.get(s.b);
      if (!a || !b) continue;
      ctx.strokeStyle = state.selection.segments.includes(s.id) ? "#ffb454" : "#e8e8ef";
      ctx.beginPath();
      ctx.moveTo(a.x * sx, a.y * sy);
      ctx.lineTo(b.x * sx, b.y * sy);
      ctx.stroke();
    }
    for (const j of wf.junctions) {
      const selected =
        state.selection.junctions.includes(j.id) || this.pendingEndpoint === j.id;
      ctx.fillStyle = selected ? "#ffb454" : "#6ab0ff";
      ctx.beginPath();
      ctx.arc(j.x * sx, j.y * sy, JUNCTION_RADIUS, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
