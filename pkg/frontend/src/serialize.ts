/** Deterministic sketch-state to wire-format serialization plus a local
 * preflight validator mirroring the server's schema checks. */

import type { SketchState } from "./state.js";
import { objectSegments } from "./state.js";
import type { VisualQueryJson } from "./types.js";

export function emitQuery(state: SketchState): VisualQueryJson {
  return {
    schemaVersion: 1,
    canvasW: state.canvasW,
    canvasH: state.canvasH,
    objects: state.objects.map((o) => ({
      id: o.id,
      type: o.type,
      nominalW: o.nominalW,
      nominalH: o.nominalH,
      segments: objectSegments(state, o.id).map((s) => ({
        panelStart: s.panelStart,
        panelEnd: s.panelEnd,
        points: s.points.map(([x, y]) => [x, y] as [number, number]),
      })),
    })),
  };
}

/** Problems that would make the server reject the query; empty if valid. */
export function validateQuery(query: VisualQueryJson): string[] {
  const problems: string[] = [];
  if (query.schemaVersion !== 1) problems.push("schemaVersion must be 1");
  if (!(query.canvasW > 0) || !(query.canvasH > 0)) {
    problems.push("canvas dimensions must be positive");
  }
  if (query.objects.length === 0) problems.push("place at least one object");
  const seen = new Set<string>();
  query.objects.forEach((obj, i) => {
    if (seen.has(obj.id)) problems.push(`objects[${i}]: duplicate id ${obj.id}`);
    seen.add(obj.id);
    if (!obj.type) problems.push(`objects[${i}]: missing type`);
    if (!(obj.nominalW > 0) || !(obj.nominalH > 0)) {
      problems.push(`objects[${i}]: nominal size must be positive`);
    }
    if (obj.segments.length === 0) {
      problems.push(`objects[${i}] (${obj.id}): drag it to give it a trajectory`);
    }
    obj.segments.forEach((seg, j) => {
      if (!(seg.panelStart < seg.panelEnd)) {
        problems.push(`objects[${i}].segments[${j}]: empty panel interval`);
      }
      if (seg.points.length < 2) {
        problems.push(`objects[${i}].segments[${j}]: needs at least 2 points`);
      }
      const prev = obj.segments[j - 1];
      if (prev && seg.panelStart < prev.panelEnd) {
        problems.push(`objects[${i}].segments[${j}]: overlaps previous segment`);
      }
    });
  });
  return problems;
}

export interface FieldLocation {
  objectIndex?: number;
  objectId?: string;
  segmentIndex?: number;
  leaf?: string;
}

/**
 * Resolve a server fieldPath like "visualQuery.objects[1].segments[0].points"
 * to the sketch element it refers to, so the error can be shown inline.
 */
export function locateField(
  fieldPath: string, query: VisualQueryJson
): FieldLocation {
  const location: FieldLocation = {};
  const objectMatch = /objects\[(\d+)\]/.exec(fieldPath);
  if (objectMatch) {
    const index = Number(objectMatch[1]);
    location.objectIndex = index;
    location.objectId = query.objects[index]?.id;
  }
  const segmentMatch = /segments\[(\d+)\]/.exec(fieldPath);
  if (segmentMatch) location.segmentIndex = Number(segmentMatch[1]);
  const leaf = fieldPath.split(".").pop();
  if (leaf && !leaf.startsWith("objects[") && !leaf.startsWith("segments[")) {
    location.leaf = leaf.replace(/\[\d+\]$/, "");
  }
  return location;
}
