"""Immutable trajectory store: MOT-style ingest, persistence, indexing.

Tracker output arrives as comma-separated lines (frame, id, corner, size,
confidence, class); simulator dataset files ingest directly by laying their
clips end to end on one timeline.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from sketchmatch.geometry import (
    BoundingBox,
    ClipWindow,
    FeatureGrid,
    GeometryError,
    Trajectory,
    window_to_grid,
)
from sketchmatch.simulator import LabeledClip, load_dataset

logger = logging.getLogger(__name__)

STORE_FORMAT_VERSION = 1

# Common tracker classes; extend via configuration, "any" is always legal.
DEFAULT_OBJECT_TYPES = (
    "person", "bicycle", "car", "motorcycle", "bus", "truck", "train",
    "boat", "dog", "cat", "horse", "bird", "backpack", "umbrella",
    "suitcase", "sports ball", "skateboard", "scooter", "traffic light",
    "stop sign",
)

# MOT challenge class ids for the types above (1=pedestrian etc. vary by
# benchmark; this default follows the COCO-style numbering most trackers emit).
DEFAULT_TYPE_MAP = {
    1: "person", 2: "bicycle", 3: "car", 4: "motorcycle", 6: "bus",
    8: "truck", 7: "train", 9: "boat", 18: "dog", 17: "cat", 19: "horse",
}


class StoreError(ValueError):
    """Raised on malformed tracker files or store invariant violations."""


@dataclass(frozen=True)
class TrackStore:
    dataset_id: str
    fps: float
    frame_count: int
    trajectories: dict[str, Trajectory]
    frame_index: dict[int, frozenset[str]]

    @property
    def object_count(self) -> int:
        return len(self.trajectories)

    def type_histogram(self) -> dict[str, int]:
        hist: dict[str, int] = {}
        for tr in self.trajectories.values():
            hist[tr.object_type] = hist.get(tr.object_type, 0) + 1
        return hist


def parse_mot(
    stream: IO[str] | Iterable[str],
    fps: float,
    type_map: dict[int, str] | None = None,
    min_conf: float = 0.0,
) -> list[Trajectory]:
    """Parse MOT-challenge lines into trajectories.

    Columns: frame, id, bb_left, bb_top, bb_width, bb_height[, conf[, class, ...]].
    Frames are 1-based on disk and 0-based in memory. Rows below min_conf are
    dropped; duplicate (frame, id) rows keep the highest confidence. Classes
    missing from type_map become type "any".
    """
    type_map = DEFAULT_TYPE_MAP if type_map is None else type_map
    per_object: dict[str, dict[int, tuple[float, BoundingBox]]] = {}
    types: dict[str, str] = {}

    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) < 6:
            raise StoreError(f"line {lineno}: expected at least 6 columns, got {len(fields)}")
        try:
            frame = int(float(fields[0]))
            obj_id = str(int(float(fields[1])))
            left, top, width, height = (float(v) for v in fields[2:6])
            conf = float(fields[6]) if len(fields) > 6 else 1.0
        except ValueError as exc:
            raise StoreError(f"line {lineno}: {exc}") from exc
        if frame < 1:
            raise StoreError(f"line {lineno}: frame {frame} is not 1-based")
        if width <= 0 or height <= 0:
            raise StoreError(f"line {lineno}: nonpositive box size {width}x{height}")
        if conf < min_conf:
            continue
        object_type = "any"
        if len(fields) > 7:
            try:
                class_id = int(float(fields[7]))
            except ValueError as exc:
                raise StoreError(f"line {lineno}: bad class field {fields[7]!r}") from exc
            object_type = type_map.get(class_id, "any")

        box = BoundingBox(
            frame=frame - 1,
            cx=left + width / 2,
            cy=top + height / 2,
            w=width,
            h=height,
        )
        rows = per_object.setdefault(obj_id, {})
        if box.frame in rows:
            if conf <= rows[box.frame][0]:
                logger.warning(
                    "line %d: duplicate (frame=%d, id=%s) dropped (lower confidence)",
                    lineno, frame, obj_id,
                )
                continue
            logger.warning(
                "line %d: duplicate (frame=%d, id=%s) replaces earlier row", lineno, frame, obj_id
            )
        rows[box.frame] = (conf, box)
        prev_type = types.get(obj_id)
        if prev_type is None or prev_type == "any":
            types[obj_id] = object_type

    trajectories = []
    for obj_id in sorted(per_object, key=lambda s: (len(s), s)):
        boxes = tuple(box for _, (_, box) in sorted(per_object[obj_id].items()))
        trajectories.append(
            Trajectory(object_id=obj_id, object_type=types[obj_id], boxes=boxes)
        )
    return trajectories


def build_store(
    trajectories: Iterable[Trajectory], fps: float, dataset_id: str = "dataset"
) -> TrackStore:
    """Index trajectories into an immutable store.

    The frame index marks every frame inside each trajectory's
    [first, last] span, bridging tracker dropouts.
    """
    trajs = {tr.object_id: tr for tr in trajectories}
    if not trajs:
        raise StoreError("no trajectories")
    if fps <= 0:
        raise StoreError(f"fps must be positive, got {fps}")
    frame_count = max(tr.last_frame for tr in trajs.values()) + 1
    active: dict[int, set[str]] = {}
    for tr in trajs.values():
        for f in range(tr.first_frame, tr.last_frame + 1):
            active.setdefault(f, set()).add(tr.object_id)
    index = {f: frozenset(ids) for f, ids in active.items()}
    return TrackStore(
        dataset_id=dataset_id,
        fps=float(fps),
        frame_count=frame_count,
        trajectories=trajs,
        frame_index=index,
    )


def _track_record(tr: Trajectory) -> dict:
    return {
        "object_id": tr.object_id,
        "object_type": tr.object_type,
        "boxes": [[b.frame, b.cx, b.cy, b.w, b.h] for b in tr.boxes],
    }


def save_store(store: TrackStore, path: str | Path) -> None:
    header = {
        "store": {
            "version": STORE_FORMAT_VERSION,
            "dataset_id": store.dataset_id,
            "fps": store.fps,
            "frame_count": store.frame_count,
        }
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for obj_id in sorted(store.trajectories):
            fh.write(
                json.dumps(_track_record(store.trajectories[obj_id]),
                           sort_keys=True, separators=(",", ":")) + "\n"
            )


def _trajectory_from_record(record: dict, lineno: int) -> Trajectory:
    try:
        boxes = tuple(
            BoundingBox(frame=int(f), cx=float(cx), cy=float(cy), w=float(w), h=float(h))
            for f, cx, cy, w, h in record["boxes"]
        )
        return Trajectory(
            object_id=str(record["object_id"]),
            object_type=str(record["object_type"]),
            boxes=boxes,
        )
    except (KeyError, TypeError, ValueError, GeometryError) as exc:
        raise StoreError(f"line {lineno}: bad track record: {exc}") from exc


def load_store(path: str | Path) -> TrackStore:
    """Load a persisted store, or ingest a simulator dataset file directly."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise StoreError(f"{path}: empty store file")
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise StoreError(f"{path}: line 1: not valid JSON: {exc}") from exc

        if "manifest" in header:
            manifest, clips = load_dataset(path)
            store, _ = store_from_clips(
                clips, fps=float(manifest["fps"]), dataset_id=path.stem
            )
            return store

        if "store" not in header:
            raise StoreError(f"{path}: header missing field 'store'")
        meta = header["store"]
        for fieldname in ("version", "dataset_id", "fps", "frame_count"):
            if fieldname not in meta:
                raise StoreError(f"{path}: header missing field '{fieldname}'")
        if meta["version"] != STORE_FORMAT_VERSION:
            raise StoreError(f"{path}: unsupported store version {meta['version']}")

        trajectories = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StoreError(f"{path}: line {lineno}: not valid JSON: {exc}") from exc
            trajectories.append(_trajectory_from_record(record, lineno))

    store = build_store(trajectories, float(meta["fps"]), dataset_id=str(meta["dataset_id"]))
    if store.frame_count > int(meta["frame_count"]):
        raise StoreError(
            f"{path}: header field 'frame_count' ({meta['frame_count']}) is smaller "
            f"than the trajectories' extent ({store.frame_count})"
        )
    return TrackStore(
        dataset_id=store.dataset_id,
        fps=store.fps,
        frame_count=int(meta["frame_count"]),
        trajectories=store.trajectories,
        frame_index=store.frame_index,
    )


@dataclass(frozen=True)
class ClipPlacement:
    """Where one clip landed on the concatenated store timeline."""

    event_id: int
    camera_index: int
    start_frame: int
    end_frame: int
    object_ids: tuple[str, ...]


def store_from_clips(
    clips: Iterable[LabeledClip], fps: float, dataset_id: str = "clips"
) -> tuple[TrackStore, list[ClipPlacement]]:
    """Concatenate labeled clips end to end into one store timeline."""
    trajectories: list[Trajectory] = []
    placements: list[ClipPlacement] = []
    offset = 0
    for clip in clips:
        span = max(tr.last_frame for tr in clip.tracks) + 1
        ids = []
        for tr in clip.tracks:
            obj_id = f"e{clip.event_id}c{clip.camera_index}o{tr.object_id}"
            ids.append(obj_id)
            boxes = tuple(
                BoundingBox(frame=b.frame + offset, cx=b.cx, cy=b.cy, w=b.w, h=b.h)
                for b in tr.boxes
            )
            trajectories.append(
                Trajectory(object_id=obj_id, object_type=tr.object_type, boxes=boxes)
            )
        placements.append(
            ClipPlacement(
                event_id=clip.event_id,
                camera_index=clip.camera_index,
                start_frame=offset,
                end_frame=offset + span - 1,
                object_ids=tuple(ids),
            )
        )
        offset += span
    store = build_store(trajectories, fps, dataset_id=dataset_id)
    return store, placements


def clip_to_grid(clip: LabeledClip, T: int) -> FeatureGrid:
    """Featurize a labeled clip over its full frame span.

    Tracks with fewer than two boxes cannot be resampled and are dropped.
    """
    tracks = tuple(tr for tr in clip.tracks if len(tr.boxes) >= 2)
    if not tracks:
        raise GeometryError("clip has no track with >= 2 boxes")
    start = min(tr.first_frame for tr in tracks)
    end = max(tr.last_frame for tr in tracks)
    window = ClipWindow(start_frame=start, end_frame=end, tracks=tracks)
    return window_to_grid(window, T=T)
