/** Trajectory panel: one row per object, one box per drag segment.
 *
 * Boxes drag horizontally to retime (cross-object alignment), their right
 * edge drags to resize (speed change), arrow buttons reorder a segment
 * within its object, and the cross deletes it.
 */

import type { DragSegment, SketchState } from "./state.js";
import { objectSegments } from "./state.js";
import { colorForType } from "./sketchpad.js";

export interface TimelineCallbacks {
  onMove(segmentId: number, newStart: number): void;
  onResize(segmentId: number, newStart: number, newEnd: number): void;
  onReorder(objectId: string, fromIndex: number, toIndex: number): void;
  onDeleteSegment(segmentId: number): void;
}

const PX_PER_TICK = 6;
const ROW_LABEL_PX = 90;

type DragKind = "move" | "resize";

interface PanelDrag {
  kind: DragKind;
  segment: DragSegment;
  grabOffsetPx: number;
}

export class Timeline {
  private drag: PanelDrag | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly getState: () => SketchState,
    private readonly callbacks: TimelineCallbacks
  ) {
    document.addEventListener("pointermove", (e) => this.pointerMove(e));
    document.addEventListener("pointerup", () => (this.drag = null));
  }

  private ticksFromPx(px: number): number {
    return Math.max(0, px / PX_PER_TICK);
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.drag) return;
    const rowRect = this.root.getBoundingClientRect();
    const px = e.clientX - rowRect.left - ROW_LABEL_PX - this.drag.grabOffsetPx;
    const segment = this.drag.segment;
    if (this.drag.kind === "move") {
      this.callbacks.onMove(segment.id, this.ticksFromPx(px));
    } else {
      const endTicks = this.ticksFromPx(
        e.clientX - rowRect.left - ROW_LABEL_PX
      );
      this.callbacks.onResize(segment.id, segment.panelStart, endTicks);
    }
  }

  render(highlightSegmentIndex?: { objectId: string; index: number }): void {
    const state = this.getState();
    this.root.replaceChildren();
    for (const object of state.objects) {
      const row = document.createElement("div");
      row.className = "timeline-row";
      const label = document.createElement("span");
      label.className = "timeline-label";
      label.textContent = `${object.type} (${object.id})`;
      row.appendChild(label);

      const track = document.createElement("div");
      track.className = "timeline-track";
      const segments = objectSegments(state, object.id);
      segments.forEach((segment, index) => {
        const box = document.createElement("div");
        box.className = "timeline-box";
        if (
          highlightSegmentIndex &&
          highlightSegmentIndex.objectId === object.id &&
          highlightSegmentIndex.index === index
        ) {
          box.classList.add("timeline-box-error");
        }
        box.style.left = `${segment.panelStart * PX_PER_TICK}px`;
        box.style.width = `${(segment.panelEnd - segment.panelStart) * PX_PER_TICK}px`;
        box.style.background = colorForType(object.type);
        box.title = `ticks ${segment.panelStart.toFixed(1)}..${segment.panelEnd.toFixed(1)}`;

        box.addEventListener("pointerdown", (e) => {
          const target = e.target as HTMLElement;
          if (target.closest("button")) return;
          const boxRect = box.getBoundingClientRect();
          const nearRightEdge = e.clientX > boxRect.right - 8;
          this.drag = {
            kind: nearRightEdge ? "resize" : "move",
            segment,
            grabOffsetPx: e.clientX - boxRect.left,
          };
          e.preventDefault();
        });

        const controls = document.createElement("span");
        controls.className = "timeline-controls";
        const mkButton = (text: string, onClick: () => void) => {
          const b = document.createElement("button");
          b.textContent = text;
          b.addEventListener("click", onClick);
          controls.appendChild(b);
        };
        if (index > 0) {
          mkButton("◀", () =>
            this.callbacks.onReorder(object.id, index, index - 1)
          );
        }
        if (index < segments.length - 1) {
          mkButton("▶", () =>
            this.callbacks.onReorder(object.id, index, index + 1)
          );
        }
        mkButton("×", () => this.callbacks.onDeleteSegment(segment.id));
        box.appendChild(controls);
        track.appendChild(box);
      });
      row.appendChild(track);
      this.root.appendChild(row);
    }
  }
}
