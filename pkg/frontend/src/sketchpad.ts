/** Canvas adapter: object icons, drag capture, and mode-dependent clicks. */

import type { CanvasObject, SketchState, ToolMode } from "./state.js";

export interface SketchpadCallbacks {
  onPlace(x: number, y: number): void;
  onDeleteObject(objectId: string): void;
  onEditObject(objectId: string): void;
  onBeginDrag(objectId: string, x: number, y: number, timeMs: number): void;
  onDragSample(x: number, y: number, timeMs: number): void;
  onEndDrag(timeMs: number): void;
}

const TYPE_COLORS = ["#2b6cb0", "#c05621", "#2f855a", "#6b46c1", "#b83280"];

export function colorForType(type: string): string {
  let hash = 0;
  for (const ch of type) hash = (hash * 31 + ch.charCodeAt(0)) >>> 0;
  return TYPE_COLORS[hash % TYPE_COLORS.length]!;
}

export class Sketchpad {
  private dragging = false;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly getState: () => SketchState,
    private readonly getMode: () => ToolMode,
    private readonly callbacks: SketchpadCallbacks
  ) {
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", (e) => this.pointerUp(e));
    canvas.addEventListener("pointerleave", (e) => this.pointerUp(e));
  }

  private toCanvas(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [
      ((e.clientX - rect.left) / rect.width) * this.canvas.width,
      ((e.clientY - rect.top) / rect.height) * this.canvas.height,
    ];
  }

  private hitObject(x: number, y: number): CanvasObject | undefined {
    const state = this.getState();
    for (let i = state.objects.length - 1; i >= 0; i--) {
      const o = state.objects[i]!;
      if (
        Math.abs(x - o.x) <= o.nominalW / 2 + 6 &&
        Math.abs(y - o.y) <= o.nominalH / 2 + 6
      ) {
        return o;
      }
    }
    return undefined;
  }

  private pointerDown(e: PointerEvent): void {
    const [x, y] = this.toCanvas(e);
    const mode = this.getMode();
    const hit = this.hitObject(x, y);
    if (mode === "create") {
      this.callbacks.onPlace(x, y);
    } else if (mode === "delete") {
      if (hit) this.callbacks.onDeleteObject(hit.id);
    } else if (mode === "edit") {
      if (hit) this.callbacks.onEditObject(hit.id);
    } else if (mode === "drag" && hit) {
      this.dragging = true;
      this.canvas.setPointerCapture(e.pointerId);
      this.callbacks.onBeginDrag(hit.id, x, y, e.timeStamp);
    }
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.dragging) return;
    const [x, y] = this.toCanvas(e);
    this.callbacks.onDragSample(x, y, e.timeStamp);
  }

  private pointerUp(e: PointerEvent): void {
    if (!this.dragging) return;
    this.dragging = false;
    this.callbacks.onEndDrag(e.timeStamp);
  }

  render(highlightObjectId?: string): void {
    const state = this.getState();
    const ctx = this.canvas.getContext("2d")!;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);

    // captured trajectories
    for (const segment of state.segments) {
      ctx.strokeStyle = colorForType(
        state.objects.find((o) => o.id === segment.objectId)?.type ?? "any"
      );
      ctx.globalAlpha = 0.45;
      ctx.lineWidth = 2;
      ctx.beginPath();
      segment.points.forEach(([x, y], i) =>
        i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)
      );
      ctx.stroke();
      ctx.globalAlpha = 1;
    }
    if (state.activeDrag && state.activeDrag.samples.length > 1) {
      ctx.strokeStyle = "#718096";
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      state.activeDrag.samples.forEach(([x, y], i) =>
        i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)
      );
      ctx.stroke();
      ctx.setLineDash([]);
    }

    for (const o of state.objects) {
      const color = colorForType(o.type);
      ctx.fillStyle = color;
      ctx.strokeStyle = o.id === highlightObjectId ? "#e53e3e" : color;
      ctx.lineWidth = o.id === highlightObjectId ? 3 : 1.5;
      ctx.globalAlpha = 0.85;
      ctx.fillRect(o.x - o.nominalW / 2, o.y - o.nominalH / 2, o.nominalW, o.nominalH);
      ctx.globalAlpha = 1;
      ctx.strokeRect(o.x - o.nominalW / 2, o.y - o.nominalH / 2, o.nominalW, o.nominalH);
      ctx.fillStyle = "#1a202c";
      ctx.font = "12px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText(o.type, o.x, o.y - o.nominalH / 2 - 4);
    }
  }
}
