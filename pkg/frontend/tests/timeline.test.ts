import { describe, expect, it } from "vitest";

import {
  appendDragSample,
  beginDrag,
  endDrag,
  initialState,
  moveSegment,
  objectSegments,
  placeObject,
  reorderSegments,
  resizeSegment,
  type SketchState,
} from "../src/state.js";
import { emitQuery } from "../src/serialize.js";

function dragLine(
  state: SketchState,
  objectId: string,
  startMs: number,
  points: [number, number][]
): SketchState {
  let s = beginDrag(state, objectId, points[0]![0], points[0]![1], startMs);
  points.slice(1).forEach(([x, y], i) => {
    s = appendDragSample(s, x, y, startMs + (i + 1) * 300);
  });
  return endDrag(s, startMs + points.length * 300);
}

function threeSegmentCar(): SketchState {
  let state = initialState(800, 450);
  state = placeObject(state, "car", 0, 0);
  state = dragLine(state, "obj1", 0, [[0, 0], [50, 0], [100, 0]]); // "left"
  state = dragLine(state, "obj1", 2000, [[100, 0], [100, 50], [100, 100]]); // "straight"
  state = dragLine(state, "obj1", 4000, [[100, 100], [50, 100], [0, 100]]); // "right"
  return state;
}

function pointsJson(state: SketchState): string[] {
  return emitQuery(state).objects[0]!.segments.map((s) => JSON.stringify(s.points));
}

describe("trajectory panel editing", () => {
  it("reorder permutes which motion plays in which slot, geometry untouched", () => {
    const state = threeSegmentCar();
    const before = pointsJson(state);
    const slots = objectSegments(state, "obj1").map((s) => [s.panelStart, s.panelEnd]);

    const reordered = reorderSegments(state, "obj1", 2, 1); // (a, b, c) -> (a, c, b)
    const after = pointsJson(reordered);
    expect(after).toEqual([before[0]!, before[2]!, before[1]!]);
    // The interval slots themselves stay fixed.
    expect(objectSegments(reordered, "obj1").map((s) => [s.panelStart, s.panelEnd]))
      .toEqual(slots);
  });

  it("resize rescales timing only: duration halves, point count unchanged", () => {
    const state = threeSegmentCar();
    const target = objectSegments(state, "obj1")[0]!;
    const duration = target.panelEnd - target.panelStart;
    const before = pointsJson(state);

    const resized = resizeSegment(
      state, target.id, target.panelStart, target.panelStart + duration / 2
    );
    const updated = objectSegments(resized, "obj1")[0]!;
    expect(updated.panelEnd - updated.panelStart).toBeCloseTo(duration / 2, 9);
    expect(pointsJson(resized)).toEqual(before);
  });

  it("move aligns a segment with another object's segment", () => {
    let state = initialState(800, 450);
    state = placeObject(state, "car", 0, 0);
    state = placeObject(state, "person", 10, 10);
    state = dragLine(state, "obj1", 0, [[0, 0], [40, 0], [80, 0]]);
    state = dragLine(state, "obj2", 5000, [[0, 50], [40, 50], [80, 50]]);

    const carSegment = objectSegments(state, "obj1")[0]!;
    const personSegment = objectSegments(state, "obj2")[0]!;
    const aligned = moveSegment(state, personSegment.id, carSegment.panelStart);
    const moved = objectSegments(aligned, "obj2")[0]!;
    expect(moved.panelStart).toBeCloseTo(carSegment.panelStart, 9);
    expect(JSON.stringify(moved.points)).toBe(JSON.stringify(personSegment.points));
  });

  it("overlap within one object snaps apart instead of overlapping", () => {
    const state = threeSegmentCar();
    const [first, second] = objectSegments(state, "obj1");
    // Try to drop the second segment right on top of the first.
    const snapped = moveSegment(state, second!.id, first!.panelStart);
    const segments = objectSegments(snapped, "obj1");
    for (let i = 1; i < segments.length; i++) {
      expect(segments[i]!.panelStart).toBeGreaterThanOrEqual(
        segments[i - 1]!.panelEnd - 1e-9
      );
    }
  });

  it("resize cannot spill into a neighboring segment", () => {
    const state = threeSegmentCar();
    const [first, second] = objectSegments(state, "obj1");
    const resized = resizeSegment(
      state, first!.id, first!.panelStart, second!.panelEnd + 50
    );
    const updated = objectSegments(resized, "obj1")[0]!;
    expect(updated.panelEnd).toBeLessThanOrEqual(second!.panelStart + 1e-9);
  });
});
