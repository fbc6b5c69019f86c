/** Ranked result browser with animated normalized-track previews. */

import type { MatchResultJson, QueryResponseJson } from "./types.js";
import { colorForType } from "./sketchpad.js";

export class ResultsView {
  private animationHandle: number | null = null;
  private speed = 1.0;

  constructor(
    private readonly listRoot: HTMLElement,
    private readonly previewCanvas: HTMLCanvasElement,
    private readonly detail: HTMLElement,
    speedSlider: HTMLInputElement
  ) {
    speedSlider.addEventListener("input", () => {
      this.speed = Number(speedSlider.value);
    });
  }

  render(response: QueryResponseJson | null): void {
    this.stopAnimation();
    this.listRoot.replaceChildren();
    const ctx = this.previewCanvas.getContext("2d")!;
    ctx.clearRect(0, 0, this.previewCanvas.width, this.previewCanvas.height);
    this.detail.textContent = "";
    if (!response) return;
    if (response.results.length === 0) {
      this.detail.textContent = "No matches.";
      return;
    }
    response.results.forEach((result, rank) => {
      const item = document.createElement("li");
      const bar = document.createElement("span");
      bar.className = "score-bar";
      bar.style.width = `${Math.max(0, result.score) * 120}px`;
      item.append(
        `#${rank + 1}  frames ${result.startFrame}..${result.endFrame}  ` +
          `score ${result.score.toFixed(3)} `,
        bar
      );
      item.addEventListener("click", () => this.select(result));
      this.listRoot.appendChild(item);
    });
    this.select(response.results[0]!);
  }

  private select(result: MatchResultJson): void {
    this.detail.textContent =
      `frames ${result.startFrame}..${result.endFrame}, ` +
      `objects ${result.objectIds.join(", ")}`;
    this.animate(result);
  }

  private stopAnimation(): void {
    if (this.animationHandle !== null) cancelAnimationFrame(this.animationHandle);
    this.animationHandle = null;
  }

  private animate(result: MatchResultJson): void {
    this.stopAnimation();
    if (result.tracks.length === 0) return;
    const canvas = this.previewCanvas;
    const ctx = canvas.getContext("2d")!;
    const T = result.tracks[0]!.values.length;
    const margin = 24;
    const scale = Math.min(canvas.width, canvas.height) - 2 * margin;
    const started = performance.now();
    const stepMs = 90;

    const draw = (now: number) => {
      const t = Math.floor(((now - started) * this.speed) / stepMs) % T;
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      for (const track of result.tracks) {
        const color = colorForType(track.objectType);
        ctx.strokeStyle = color;
        ctx.globalAlpha = 0.35;
        ctx.beginPath();
        track.values.forEach(([cx, cy], i) => {
          if (!track.mask[i]) return;
          const px = margin + cx * scale;
          const py = margin + cy * scale;
          if (i === 0) ctx.moveTo(px, py);
          else ctx.lineTo(px, py);
        });
        ctx.stroke();
        ctx.globalAlpha = 1;
        if (track.mask[t]) {
          const row = track.values[t]!;
          const [cx, cy, w, h] = row;
          ctx.strokeRect(
            margin + (cx - w / 2) * scale,
            margin + (cy - h / 2) * scale,
            Math.max(2, w * scale),
            Math.max(2, h * scale)
          );
        }
      }
      this.animationHandle = requestAnimationFrame(draw);
    };
    this.animationHandle = requestAnimationFrame(draw);
  }
}
