/** Pure query playback: object positions as a function of panel time.
 *
 * Mirrors the backend's timeline semantics: points spread uniformly over a
 * segment's interval, gaps hold the last position, and an object is absent
 * before its first segment and after its last one.
 */

import type { QueryObjectJson, VisualQueryJson } from "./types.js";

export interface ReplaySample {
  x: number;
  y: number;
  present: boolean;
}

export function panelSpan(query: VisualQueryJson): [number, number] {
  let lo = Number.POSITIVE_INFINITY;
  let hi = Number.NEGATIVE_INFINITY;
  for (const obj of query.objects) {
    for (const seg of obj.segments) {
      lo = Math.min(lo, seg.panelStart);
      hi = Math.max(hi, seg.panelEnd);
    }
  }
  return [lo, hi];
}

function interpolateSegment(
  seg: QueryObjectJson["segments"][number], tick: number
): [number, number] {
  const n = seg.points.length;
  const span = seg.panelEnd - seg.panelStart;
  const u = ((tick - seg.panelStart) / span) * (n - 1);
  const i = Math.max(0, Math.min(n - 2, Math.floor(u)));
  const frac = Math.max(0, Math.min(1, u - i));
  const a = seg.points[i]!;
  const b = seg.points[i + 1]!;
  return [a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1])];
}

export function objectAt(obj: QueryObjectJson, tick: number): ReplaySample {
  const segments = obj.segments;
  const first = segments[0]!;
  const last = segments[segments.length - 1]!;
  if (tick < first.panelStart) {
    const p = first.points[0]!;
    return { x: p[0], y: p[1], present: false };
  }
  if (tick > last.panelEnd) {
    const p = last.points[last.points.length - 1]!;
    return { x: p[0], y: p[1], present: false };
  }
  let held: [number, number] = first.points[0]!;
  for (const seg of segments) {
    if (tick < seg.panelStart) break; // in the gap before this segment
    if (tick <= seg.panelEnd) {
      const [x, y] = interpolateSegment(seg, tick);
      return { x, y, present: true };
    }
    held = seg.points[seg.points.length - 1]!;
  }
  return { x: held[0], y: held[1], present: true };
}

export function replayFrame(
  query: VisualQueryJson, tick: number
): Map<string, ReplaySample> {
  const frame = new Map<string, ReplaySample>();
  for (const obj of query.objects) frame.set(obj.id, objectAt(obj, tick));
  return frame;
}
