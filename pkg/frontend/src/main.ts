/** Application shell: toolbar, canvas, trajectory panel, replay, results. */

import { ApiClient, ApiRequestError } from "./api.js";
import { emitQuery, locateField, validateQuery } from "./serialize.js";
import { objectAt, panelSpan } from "./replay.js";
import { Sketchpad, colorForType } from "./sketchpad.js";
import { Timeline } from "./timeline.js";
import { ResultsView } from "./results.js";
import type { SketchState, ToolMode } from "./state.js";
import {
  appendDragSample,
  beginDrag,
  deleteObject,
  deleteSegment,
  editObjectType,
  endDrag,
  initialState,
  moveSegment,
  placeObject,
  reorderSegments,
  resizeSegment,
} from "./state.js";
import type { QueryResponseJson, VisualQueryJson } from "./types.js";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? "http://localhost:8000";
}

const el = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

class App {
  private state: SketchState;
  private mode: ToolMode = "create";
  private selectedType = "car";
  private types: string[] = ["any"];
  private datasetId: string | null = null;
  private lastResponse: QueryResponseJson | null = null;
  private errorObjectId: string | undefined;
  private errorSegment: { objectId: string; index: number } | undefined;
  private replayHandle: number | null = null;

  private readonly api = new ApiClient(apiBase());
  private readonly sketchpad: Sketchpad;
  private readonly timeline: Timeline;
  private readonly results: ResultsView;

  constructor() {
    const canvas = el<HTMLCanvasElement>("sketchpad");
    this.state = initialState(canvas.width, canvas.height);
    this.sketchpad = new Sketchpad(
      canvas,
      () => this.state,
      () => this.mode,
      {
        onPlace: (x, y) => this.update(placeObject(this.state, this.selectedType, x, y)),
        onDeleteObject: (id) => this.update(deleteObject(this.state, id)),
        onEditObject: (id) => {
          const next = window.prompt("Object type", "car") ?? "";
          if (this.types.includes(next) || next === "any") {
            this.update(editObjectType(this.state, id, next));
          }
        },
        onBeginDrag: (id, x, y, t) => this.update(beginDrag(this.state, id, x, y, t)),
        onDragSample: (x, y, t) => this.update(appendDragSample(this.state, x, y, t)),
        onEndDrag: (t) => this.update(endDrag(this.state, t)),
      }
    );
    this.timeline = new Timeline(el("timeline"), () => this.state, {
      onMove: (id, start) => this.update(moveSegment(this.state, id, start)),
      onResize: (id, start, end) => this.update(resizeSegment(this.state, id, start, end)),
      onReorder: (objectId, from, to) =>
        this.update(reorderSegments(this.state, objectId, from, to)),
      onDeleteSegment: (id) => this.update(deleteSegment(this.state, id)),
    });
    this.results = new ResultsView(
      el("results-list"),
      el<HTMLCanvasElement>("preview-canvas"),
      el("result-detail"),
      el<HTMLInputElement>("preview-speed")
    );

    this.bindToolbar();
    void this.loadServerState();
    this.update(this.state);
  }

  private bindToolbar(): void {
    for (const mode of ["create", "drag", "edit", "delete"] as ToolMode[]) {
      el<HTMLButtonElement>(`mode-${mode}`).addEventListener("click", () => {
        this.mode = mode;
        this.renderToolbar();
      });
    }
    el<HTMLSelectElement>("type-select").addEventListener("change", (e) => {
      this.selectedType = (e.target as HTMLSelectElement).value;
    });
    el<HTMLSelectElement>("dataset-select").addEventListener("change", (e) => {
      const value = (e.target as HTMLSelectElement).value;
      this.datasetId = value || null;
    });
    el<HTMLButtonElement>("upload-button").addEventListener("click", () => {
      void this.upload();
    });
    el<HTMLButtonElement>("replay-button").addEventListener("click", () => {
      this.openReplay();
    });
    el<HTMLButtonElement>("run-button").addEventListener("click", () => {
      void this.run();
    });
    el<HTMLButtonElement>("show-results-button").addEventListener("click", () => {
      el("results-modal").classList.remove("hidden");
      this.results.render(this.lastResponse);
    });
    for (const id of ["replay-close", "results-close"]) {
      el<HTMLButtonElement>(id).addEventListener("click", () => {
        el(id === "replay-close" ? "replay-modal" : "results-modal").classList.add("hidden");
        if (id === "replay-close" && this.replayHandle !== null) {
          cancelAnimationFrame(this.replayHandle);
          this.replayHandle = null;
        }
      });
    }
  }

  private async loadServerState(): Promise<void> {
    try {
      this.types = await this.api.getTypes();
      const select = el<HTMLSelectElement>("type-select");
      select.replaceChildren();
      for (const type of [...this.types, "any"]) {
        const option = document.createElement("option");
        option.value = type;
        option.textContent = type;
        select.appendChild(option);
      }
      select.value = this.types.includes("car") ? "car" : this.types[0] ?? "any";
      this.selectedType = select.value;
      await this.refreshDatasets();
      this.setStatus("ready");
    } catch (err) {
      this.setStatus(`cannot reach service at ${apiBase()}: ${String(err)}`, true);
    }
  }

  private async refreshDatasets(): Promise<void> {
    const datasets = await this.api.getDatasets();
    const select = el<HTMLSelectElement>("dataset-select");
    select.replaceChildren();
    for (const ds of datasets) {
      const option = document.createElement("option");
      option.value = ds.datasetId;
      option.textContent = `${ds.name} (${ds.frameCount} frames, ${ds.objectCount} objects)`;
      select.appendChild(option);
    }
    if (datasets.length > 0) {
      this.datasetId = datasets[datasets.length - 1]!.datasetId;
      select.value = this.datasetId;
    }
  }

  private async upload(): Promise<void> {
    const input = el<HTMLInputElement>("upload-file");
    const file = input.files?.[0];
    if (!file) {
      this.setStatus("choose a tracking file first", true);
      return;
    }
    const name = window.prompt("Dataset name", file.name) ?? file.name;
    const looksJson = file.name.endsWith(".jsonl") || file.name.endsWith(".json");
    let fps: number | undefined;
    if (!looksJson) {
      fps = Number(window.prompt("Frames per second of the source video", "10") ?? "10");
    }
    try {
      await this.api.uploadDataset(file, file.name, name, fps);
      await this.refreshDatasets();
      this.setStatus(`uploaded ${name}`);
    } catch (err) {
      this.setStatus(this.describeError(err), true);
    }
  }

  private openReplay(): void {
    const query = emitQuery(this.state);
    const problems = validateQuery(query);
    if (problems.length > 0) {
      this.setStatus(problems[0]!, true);
      return;
    }
    el("replay-modal").classList.remove("hidden");
    this.animateReplay(query);
  }

  private animateReplay(query: VisualQueryJson): void {
    const canvas = el<HTMLCanvasElement>("replay-canvas");
    const ctx = canvas.getContext("2d")!;
    const [lo, hi] = panelSpan(query);
    const speedInput = el<HTMLInputElement>("replay-speed");
    const started = performance.now();
    const scaleX = canvas.width / query.canvasW;
    const scaleY = canvas.height / query.canvasH;

    const draw = (now: number) => {
      const speed = Number(speedInput.value);
      const elapsedTicks = ((now - started) / 100) * speed;
      const tick = lo + (elapsedTicks % Math.max(hi - lo, 1e-9));
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      for (const obj of query.objects) {
        const sample = objectAt(obj, tick);
        if (!sample.present) continue;
        ctx.fillStyle = colorForType(obj.type);
        ctx.fillRect(
          (sample.x - obj.nominalW / 2) * scaleX,
          (sample.y - obj.nominalH / 2) * scaleY,
          obj.nominalW * scaleX,
          obj.nominalH * scaleY
        );
        ctx.fillStyle = "#1a202c";
        ctx.font = "11px sans-serif";
        ctx.fillText(obj.type, sample.x * scaleX, (sample.y - obj.nominalH / 2) * scaleY - 3);
      }
      this.replayHandle = requestAnimationFrame(draw);
    };
    if (this.replayHandle !== null) cancelAnimationFrame(this.replayHandle);
    this.replayHandle = requestAnimationFrame(draw);
  }

  private describeError(err: unknown): string {
    if (err instanceof ApiRequestError) {
      return err.fieldPath ? `${err.message} (${err.fieldPath})` : err.message;
    }
    return String(err);
  }

  private async run(): Promise<void> {
    this.errorObjectId = undefined;
    this.errorSegment = undefined;
    const query = emitQuery(this.state);
    const problems = validateQuery(query);
    if (problems.length > 0) {
      this.setStatus(problems[0]!, true);
      return;
    }
    if (!this.datasetId) {
      this.setStatus("select or upload a dataset first", true);
      return;
    }
    const runButton = el<HTMLButtonElement>("run-button");
    runButton.disabled = true;
    this.setStatus("running query...");
    try {
      this.lastResponse = await this.api.runQuery({
        datasetId: this.datasetId,
        visualQuery: query,
        k: 10,
      });
      this.setStatus(
        `found ${this.lastResponse.results.length} moments ` +
          `(query ${this.lastResponse.queryId})`
      );
      el("results-modal").classList.remove("hidden");
      this.results.render(this.lastResponse);
    } catch (err) {
      if (err instanceof ApiRequestError && err.fieldPath) {
        const location = locateField(err.fieldPath, query);
        this.errorObjectId = location.objectId;
        if (location.objectId !== undefined && location.segmentIndex !== undefined) {
          this.errorSegment = {
            objectId: location.objectId,
            index: location.segmentIndex,
          };
        }
      }
      this.setStatus(this.describeError(err), true);
    } finally {
      runButton.disabled = false;
      this.update(this.state);
    }
  }

  private setStatus(message: string, isError = false): void {
    const status = el("status");
    status.textContent = message;
    status.classList.toggle("error", isError);
  }

  private renderToolbar(): void {
    for (const mode of ["create", "drag", "edit", "delete"] as ToolMode[]) {
      el(`mode-${mode}`).classList.toggle("active", this.mode === mode);
    }
  }

  private update(next: SketchState): void {
    this.state = next;
    this.renderToolbar();
    this.sketchpad.render(this.errorObjectId);
    this.timeline.render(this.errorSegment);
  }
}

window.addEventListener("DOMContentLoaded", () => new App());
