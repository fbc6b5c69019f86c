"""Domain types and the deterministic geometry pipeline.

Turns raw bounding-box trajectories or sketched queries into fixed-shape,
camera-robust feature arrays: per-object resampling to a common length,
then joint translation/scale normalization over the window extent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FEATURE_DIM = 4  # (cx, cy, w, h) per timestep
DEFAULT_RESAMPLE_LENGTH = 32


class GeometryError(ValueError):
    """Raised when geometry inputs violate a documented precondition."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box at one frame, stored as center plus size."""

    frame: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.frame < 0:
            raise GeometryError(f"frame must be >= 0, got {self.frame}")
        if not (self.w > 0 and self.h > 0):
            raise GeometryError(f"box size must be positive, got w={self.w}, h={self.h}")


@dataclass(frozen=True)
class Trajectory:
    """One tracked object's box sequence, strictly increasing in frame."""

    object_id: str
    object_type: str
    boxes: tuple[BoundingBox, ...]

    def __post_init__(self) -> None:
        if not self.boxes:
            raise GeometryError("empty trajectory")
        frames = [b.frame for b in self.boxes]
        if any(b >= a for b, a in zip(frames, frames[1:])):
            raise GeometryError(
                f"trajectory {self.object_id!r} frames must be strictly increasing"
            )

    @property
    def first_frame(self) -> int:
        return self.boxes[0].frame

    @property
    def last_frame(self) -> int:
        return self.boxes[-1].frame

    def slice(self, start_frame: int, end_frame: int) -> "Trajectory | None":
        """Sub-trajectory of boxes with frames inside [start_frame, end_frame].

        Returns None when fewer than one box falls inside the range.
        """
        kept = tuple(b for b in self.boxes if start_frame <= b.frame <= end_frame)
        if not kept:
            return None
        return Trajectory(self.object_id, self.object_type, kept)


@dataclass(frozen=True)
class ClipWindow:
    """A frame interval plus the ordered tracks participating in it.

    Track order is the canonical object ordering used for featurization.
    """

    start_frame: int
    end_frame: int
    tracks: tuple[Trajectory, ...]

    def __post_init__(self) -> None:
        if self.start_frame > self.end_frame:
            raise GeometryError(
                f"window start {self.start_frame} exceeds end {self.end_frame}"
            )
        for tr in self.tracks:
            inside = sum(1 for b in tr.boxes if self.start_frame <= b.frame <= self.end_frame)
            if inside < 2:
                raise GeometryError(
                    f"track {tr.object_id!r} has {inside} boxes inside "
                    f"[{self.start_frame}, {self.end_frame}], need >= 2"
                )


@dataclass(frozen=True)
class QuerySegment:
    """One drag gesture: pointer samples spread over a panel-time interval."""

    panel_start: float
    panel_end: float
    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.panel_start < self.panel_end:
            raise GeometryError(
                f"segment panel interval invalid: [{self.panel_start}, {self.panel_end}]"
            )
        if len(self.points) < 2:
            raise GeometryError("segment needs at least 2 points")


@dataclass(frozen=True)
class QueryObject:
    object_id: str
    object_type: str
    nominal_w: float
    nominal_h: float
    segments: tuple[QuerySegment, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise GeometryError(f"query object {self.object_id!r} has no segments")
        segs = self.segments
        for a, b in zip(segs, segs[1:]):
            if b.panel_start < a.panel_end:
                raise GeometryError(
                    f"query object {self.object_id!r} segments overlap in panel time"
                )


@dataclass(frozen=True)
class VisualQuery:
    """Sketch output: typed objects with drag segments on a shared panel axis."""

    canvas_w: float
    canvas_h: float
    objects: tuple[QueryObject, ...]

    def __post_init__(self) -> None:
        if not self.objects:
            raise GeometryError("query has no objects")

    @property
    def panel_span(self) -> tuple[float, float]:
        starts = [s.panel_start for o in self.objects for s in o.segments]
        ends = [s.panel_end for o in self.objects for s in o.segments]
        return min(starts), max(ends)


@dataclass(frozen=True)
class FeatureGrid:
    """Fixed-shape encoder input: num_objects x T x 4 values plus presence mask."""

    values: np.ndarray  # (num_objects, T, 4) float64
    mask: np.ndarray  # (num_objects, T) bool

    def __post_init__(self) -> None:
        if self.values.ndim != 3 or self.values.shape[2] != FEATURE_DIM:
            raise GeometryError(f"values must be (num_objects, T, 4), got {self.values.shape}")
        if self.mask.shape != self.values.shape[:2]:
            raise GeometryError(
                f"mask shape {self.mask.shape} does not match values {self.values.shape[:2]}"
            )

    @property
    def num_objects(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]


def _sample_positions(start: float, end: float, T: int) -> np.ndarray:
    # Uniform positions across [start, end]; degenerate ranges collapse to start.
    steps = np.arange(T, dtype=np.float64)
    return start + steps * ((end - start) / (T - 1))


def resample(
    traj: Trajectory, frame_range: tuple[float, float], T: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sample (cx, cy, w, h) at T uniform positions across frame_range.

    Values are linearly interpolated between bracketing boxes. Positions
    outside the trajectory's [first, last] frame span are masked out and
    filled with the nearest endpoint's values.
    """
    if T < 2:
        raise GeometryError("invalid resample length")
    if not traj.boxes:
        raise GeometryError("empty trajectory")
    lo, hi = frame_range
    if lo > hi:
        raise GeometryError(f"invalid frame range [{lo}, {hi}]")

    frames = np.array([b.frame for b in traj.boxes], dtype=np.float64)
    data = np.array([[b.cx, b.cy, b.w, b.h] for b in traj.boxes], dtype=np.float64)
    positions = _sample_positions(float(lo), float(hi), T)

    values = np.empty((T, FEATURE_DIM), dtype=np.float64)
    for c in range(FEATURE_DIM):
        values[:, c] = np.interp(positions, frames, data[:, c])
    mask = (positions >= frames[0]) & (positions <= frames[-1])
    return values, mask


def normalize(values: np.ndarray, mask: np.ndarray) -> FeatureGrid:
    """Translate/scale a window's samples into the unit square.

    The tight corner extent of all masked-in boxes across all objects is
    translated to the origin and uniformly scaled by 1/max(extent_w, extent_h);
    box sizes scale by the same factor, preserving aspect and inter-object
    geometry. A zero extent maps all centers to 0.5 and leaves sizes as-is.
    """
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if values.ndim == 2:
        values = values[None]
        mask = mask[None]
    if not mask.any():
        raise GeometryError("empty window")

    cx, cy, w, h = (values[..., i] for i in range(4))
    mx = mask
    x_min = float(np.min((cx - w / 2)[mx]))
    x_max = float(np.max((cx + w / 2)[mx]))
    y_min = float(np.min((cy - h / 2)[mx]))
    y_max = float(np.max((cy + h / 2)[mx]))
    extent = max(x_max - x_min, y_max - y_min)

    out = np.empty_like(values)
    if extent <= 0.0:
        out[..., 0] = 0.5
        out[..., 1] = 0.5
        out[..., 2] = w
        out[..., 3] = h
    else:
        scale = 1.0 / extent
        out[..., 0] = (cx - x_min) * scale
        out[..., 1] = (cy - y_min) * scale
        out[..., 2] = w * scale
        out[..., 3] = h * scale
    return FeatureGrid(values=out, mask=mask.copy())


def window_to_grid(window: ClipWindow, T: int = DEFAULT_RESAMPLE_LENGTH) -> FeatureGrid:
    """Resample every track of a window and jointly normalize."""
    sampled = []
    masks = []
    for tr in window.tracks:
        v, m = resample(tr, (window.start_frame, window.end_frame), T)
        sampled.append(v)
        masks.append(m)
    return normalize(np.stack(sampled), np.stack(masks))


def _object_timeline(obj: QueryObject, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions of one query object at the given panel times.

    Inside a segment, pointer points are spaced uniformly over its panel
    interval and linearly interpolated. Gaps between segments hold the last
    position with mask=true; before the first segment and after the last,
    the nearest endpoint is held with mask=false.
    """
    T = len(times)
    xy = np.empty((T, 2), dtype=np.float64)
    valid = np.zeros(T, dtype=bool)

    segs = obj.segments
    knots = []
    for seg in segs:
        pts = np.asarray(seg.points, dtype=np.float64)
        u = _sample_positions(seg.panel_start, seg.panel_end, len(pts))
        knots.append((seg.panel_start, seg.panel_end, u, pts))

    first_start = segs[0].panel_start
    last_end = segs[-1].panel_end
    for i, t in enumerate(times):
        if t < first_start:
            xy[i] = knots[0][3][0]
            continue
        if t > last_end:
            xy[i] = knots[-1][3][-1]
            continue
        valid[i] = True
        placed = False
        for (s, e, u, pts) in knots:
            if s <= t <= e:
                xy[i, 0] = np.interp(t, u, pts[:, 0])
                xy[i, 1] = np.interp(t, u, pts[:, 1])
                placed = True
                break
            if t < s:
                break
        if not placed:
            # In a gap: hold the last position of the preceding segment.
            prev = max((k for k in knots if k[1] < t), key=lambda k: k[1])
            xy[i] = prev[3][-1]
    return xy, valid


def query_to_grid(q: VisualQuery, T: int = DEFAULT_RESAMPLE_LENGTH) -> FeatureGrid:
    """Render a sketched query onto the shared panel axis and normalize.

    Each object's drag segments are mapped to the global panel interval,
    sampled at T uniform ticks, given the object's constant nominal box
    size, and normalized jointly with the other objects.
    """
    if T < 2:
        raise GeometryError("invalid resample length")
    lo, hi = q.panel_span
    times = _sample_positions(lo, hi, T)

    values = np.empty((len(q.objects), T, FEATURE_DIM), dtype=np.float64)
    masks = np.empty((len(q.objects), T), dtype=bool)
    for k, obj in enumerate(q.objects):
        xy, valid = _object_timeline(obj, times)
        values[k, :, 0] = xy[:, 0]
        values[k, :, 1] = xy[:, 1]
        values[k, :, 2] = obj.nominal_w
        values[k, :, 3] = obj.nominal_h
        masks[k] = valid
    return normalize(values, masks)


def query_to_tracks(q: VisualQuery, fps: float = 1.0, frames_per_tick: float = 1.0) -> list[Trajectory]:
    """Render a query as concrete trajectories, one box per frame.

    The panel axis is mapped to frames via frames_per_tick; box sizes are the
    objects' nominal sizes. Useful for fixtures and self-retrieval checks.
    """
    lo, hi = q.panel_span
    n_frames = max(2, int(round((hi - lo) * frames_per_tick)) + 1)
    frame_ticks = lo + np.arange(n_frames) / frames_per_tick
    out = []
    for obj in q.objects:
        xy, valid = _object_timeline(obj, frame_ticks)
        boxes = tuple(
            BoundingBox(frame=i, cx=float(x), cy=float(y), w=obj.nominal_w, h=obj.nominal_h)
            for i, ((x, y), ok) in enumerate(zip(xy, valid))
            if ok
        )
        out.append(Trajectory(object_id=obj.object_id, object_type=obj.object_type, boxes=boxes))
    return out


def temporal_iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    """Intersection over union of two inclusive integer frame intervals."""
    (a0, a1), (b0, b1) = a, b
    if a0 > a1 or b0 > b1:
        raise GeometryError("invalid interval")
    inter = min(a1, b1) - max(a0, b0) + 1
    if inter <= 0:
        return 0.0
    union = (a1 - a0 + 1) + (b1 - b0 + 1) - inter
    return inter / union
