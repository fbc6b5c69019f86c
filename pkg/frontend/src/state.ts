/**
 * Pure sketch-editing state machine.
 *
 * All mutations return a new state, so the DOM layers stay thin adapters
 * and every behavior is testable without a browser. Panel time is measured
 * in ticks derived from wall-clock capture time (MS_PER_TICK); edits in the
 * trajectory panel change only timing and ordering, never the captured
 * pointer geometry.
 */

/** 1 panel tick corresponds to 1 store frame by default on the backend. */
export const MS_PER_TICK = 100;
/** Pointer sampling interval while dragging. */
export const SAMPLE_INTERVAL_MS = 33;
/** Minimum panel length of a segment, in ticks. */
export const MIN_SEGMENT_TICKS = 2;
/** Default icon size relative to the canvas' smaller dimension. */
export const NOMINAL_SIZE_FRACTION = 0.1;

export type ToolMode = "create" | "drag" | "edit" | "delete";

export interface CanvasObject {
  id: string;
  type: string;
  x: number;
  y: number;
  nominalW: number;
  nominalH: number;
}

export interface DragSegment {
  id: number;
  objectId: string;
  panelStart: number;
  panelEnd: number;
  /** Captured pointer geometry; panel edits must never touch this. */
  points: [number, number][];
}

interface ActiveDrag {
  objectId: string;
  startedAtMs: number;
  lastSampleMs: number;
  samples: [number, number][];
}

export interface SketchState {
  canvasW: number;
  canvasH: number;
  objects: CanvasObject[];
  segments: DragSegment[];
  nextObjectSeq: number;
  nextSegmentSeq: number;
  /** Wall-clock origin of the panel axis; set by the first drag. */
  sessionStartMs: number | null;
  activeDrag: ActiveDrag | null;
}

export function initialState(canvasW: number, canvasH: number): SketchState {
  return {
    canvasW,
    canvasH,
    objects: [],
    segments: [],
    nextObjectSeq: 1,
    nextSegmentSeq: 1,
    sessionStartMs: null,
    activeDrag: null,
  };
}

export function placeObject(
  state: SketchState, type: string, x: number, y: number
): SketchState {
  const size = NOMINAL_SIZE_FRACTION * Math.min(state.canvasW, state.canvasH);
  const object: CanvasObject = {
    id: `obj${state.nextObjectSeq}`,
    type,
    x,
    y,
    nominalW: size,
    nominalH: size,
  };
  return {
    ...state,
    objects: [...state.objects, object],
    nextObjectSeq: state.nextObjectSeq + 1,
  };
}

export function deleteObject(state: SketchState, objectId: string): SketchState {
  return {
    ...state,
    objects: state.objects.filter((o) => o.id !== objectId),
    segments: state.segments.filter((s) => s.objectId !== objectId),
    activeDrag: state.activeDrag?.objectId === objectId ? null : state.activeDrag,
  };
}

export function editObjectType(
  state: SketchState, objectId: string, type: string
): SketchState {
  return {
    ...state,
    objects: state.objects.map((o) => (o.id === objectId ? { ...o, type } : o)),
  };
}

export function objectSegments(state: SketchState, objectId: string): DragSegment[] {
  return state.segments
    .filter((s) => s.objectId === objectId)
    .sort((a, b) => a.panelStart - b.panelStart);
}

export function beginDrag(
  state: SketchState, objectId: string, x: number, y: number, timeMs: number
): SketchState {
  if (!state.objects.some((o) => o.id === objectId)) return state;
  return {
    ...state,
    sessionStartMs: state.sessionStartMs ?? timeMs,
    activeDrag: {
      objectId,
      startedAtMs: timeMs,
      lastSampleMs: timeMs,
      samples: [[x, y]],
    },
  };
}

export function appendDragSample(
  state: SketchState, x: number, y: number, timeMs: number
): SketchState {
  const drag = state.activeDrag;
  if (!drag) return state;
  if (timeMs - drag.lastSampleMs < SAMPLE_INTERVAL_MS) return state;
  return {
    ...state,
    activeDrag: {
      ...drag,
      lastSampleMs: timeMs,
      samples: [...drag.samples, [x, y]],
    },
  };
}

/**
 * Finish the active drag: fewer than 2 samples are discarded silently;
 * otherwise a panel segment is appended whose interval reflects the real
 * capture timing, shifted right if it would overlap an existing segment
 * of the same object.
 */
export function endDrag(state: SketchState, timeMs: number): SketchState {
  const drag = state.activeDrag;
  if (!drag) return state;
  const cleared = { ...state, activeDrag: null };
  if (drag.samples.length < 2) return cleared;

  const origin = state.sessionStartMs ?? drag.startedAtMs;
  let panelStart = (drag.startedAtMs - origin) / MS_PER_TICK;
  let panelEnd = Math.max(
    (timeMs - origin) / MS_PER_TICK, panelStart + MIN_SEGMENT_TICKS
  );
  const duration = panelEnd - panelStart;
  for (const existing of objectSegments(state, drag.objectId)) {
    if (panelStart < existing.panelEnd && existing.panelStart < panelEnd) {
      panelStart = existing.panelEnd;
      panelEnd = panelStart + duration;
    }
  }

  const lastPoint = drag.samples[drag.samples.length - 1]!;
  const segment: DragSegment = {
    id: state.nextSegmentSeq,
    objectId: drag.objectId,
    panelStart,
    panelEnd,
    points: drag.samples,
  };
  return {
    ...cleared,
    nextSegmentSeq: state.nextSegmentSeq + 1,
    segments: [...state.segments, segment],
    objects: cleared.objects.map((o) =>
      o.id === drag.objectId ? { ...o, x: lastPoint[0], y: lastPoint[1] } : o
    ),
  };
}

export function deleteSegment(state: SketchState, segmentId: number): SketchState {
  return { ...state, segments: state.segments.filter((s) => s.id !== segmentId) };
}

function replaceSegment(
  state: SketchState, segment: DragSegment
): SketchState {
  return {
    ...state,
    segments: state.segments.map((s) => (s.id === segment.id ? segment : s)),
  };
}

/** Clamp [start, end] into the free gap around the segment's current slot. */
function snapIntoGap(
  state: SketchState, segment: DragSegment, start: number, end: number
): [number, number] {
  const siblings = objectSegments(state, segment.objectId).filter(
    (s) => s.id !== segment.id
  );
  let lo = 0;
  let hi = Number.POSITIVE_INFINITY;
  for (const other of siblings) {
    if (other.panelEnd <= segment.panelStart + 1e-9) lo = Math.max(lo, other.panelEnd);
    if (other.panelStart >= segment.panelEnd - 1e-9) hi = Math.min(hi, other.panelStart);
  }
  const duration = end - start;
  let s = Math.max(lo, Math.min(start, hi - duration));
  return [s, s + duration];
}

/**
 * Shift a segment's panel interval (duration preserved). Overlap with the
 * same object's other segments snaps into the containing gap; alignment
 * across objects is unrestricted.
 */
export function moveSegment(
  state: SketchState, segmentId: number, newStart: number
): SketchState {
  const segment = state.segments.find((s) => s.id === segmentId);
  if (!segment) return state;
  const duration = segment.panelEnd - segment.panelStart;
  const [start, end] = snapIntoGap(
    state, segment, Math.max(0, newStart), Math.max(0, newStart) + duration
  );
  return replaceSegment(state, { ...segment, panelStart: start, panelEnd: end });
}

/**
 * Rescale a segment's interval: stretching slows the motion down,
 * shrinking speeds it up. The pointer samples are untouched.
 */
export function resizeSegment(
  state: SketchState, segmentId: number, newStart: number, newEnd: number
): SketchState {
  const segment = state.segments.find((s) => s.id === segmentId);
  if (!segment) return state;
  let start = Math.max(0, newStart);
  let end = Math.max(start + MIN_SEGMENT_TICKS, newEnd);
  const siblings = objectSegments(state, segment.objectId).filter(
    (s) => s.id !== segment.id
  );
  for (const other of siblings) {
    if (other.panelEnd <= segment.panelStart + 1e-9) start = Math.max(start, other.panelEnd);
    if (other.panelStart >= segment.panelEnd - 1e-9) end = Math.min(end, other.panelStart);
  }
  if (end - start < MIN_SEGMENT_TICKS) end = start + MIN_SEGMENT_TICKS;
  return replaceSegment(state, { ...segment, panelStart: start, panelEnd: end });
}

/**
 * Reorder an object's segments: the sorted interval slots stay where they
 * are and the segment payloads (pointer geometry) permute across them, so
 * moving a box changes which motion plays when.
 */
export function reorderSegments(
  state: SketchState, objectId: string, fromIndex: number, toIndex: number
): SketchState {
  const ordered = objectSegments(state, objectId);
  if (
    fromIndex < 0 || fromIndex >= ordered.length ||
    toIndex < 0 || toIndex >= ordered.length || fromIndex === toIndex
  ) {
    return state;
  }
  const slots = ordered.map((s) => [s.panelStart, s.panelEnd] as const);
  const payloads = ordered.map((s) => ({ id: s.id, points: s.points }));
  const [moved] = payloads.splice(fromIndex, 1);
  payloads.splice(toIndex, 0, moved!);

  const updates = new Map<number, DragSegment>();
  ordered.forEach((original, i) => {
    const slot = slots[i]!;
    const payload = payloads[i]!;
    updates.set(payload.id, {
      id: payload.id,
      objectId,
      panelStart: slot[0],
      panelEnd: slot[1],
      points: payload.points,
    });
  });
  return {
    ...state,
    segments: state.segments.map((s) => updates.get(s.id) ?? s),
  };
}
