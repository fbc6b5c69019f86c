"""HTTP facade: dataset upload, query execution, result cache.

The sketch frontend talks only to this API. Wire format for queries
(camelCase, schemaVersion 1):

    {"schemaVersion": 1, "canvasW": ..., "canvasH": ...,
     "objects": [{"id": ..., "type": ..., "nominalW": ..., "nominalH": ...,
                  "segments": [{"panelStart": ..., "panelEnd": ...,
                                "points": [[x, y], ...]}]}]}

All error payloads carry {code, message, fieldPath?}.
"""

from __future__ import annotations

import io
import json
import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from sketchmatch.encoder.model import EncoderWeights
from sketchmatch.encoder.serialization import load_weights
from sketchmatch.geometry import (
    GeometryError,
    QueryObject,
    QuerySegment,
    VisualQuery,
    query_to_grid,
)
from sketchmatch.matcher import (
    MatchError,
    MatchResult,
    SearchConfig,
    assignment_grid,
    query_span_frames,
    search,
)
from sketchmatch.store import (
    DEFAULT_OBJECT_TYPES,
    StoreError,
    TrackStore,
    build_store,
    load_store,
    parse_mot,
    save_store,
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ServiceConfig:
    port: int = 8000
    weights_path: str | None = None
    data_dir: str = "data"
    cache_size: int = 64
    max_upload_bytes: int = 100 * 1024 * 1024
    object_types: tuple[str, ...] = DEFAULT_OBJECT_TYPES
    search_defaults: SearchConfig = field(default_factory=SearchConfig)

    @staticmethod
    def from_file(path: str | Path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text())
        search_kwargs = {}
        overrides = raw.get("searchDefaults", {})
        for json_name, py_name in _SEARCH_FIELDS.items():
            if json_name in overrides:
                value = overrides[json_name]
                if py_name == "length_factors":
                    value = tuple(value)
                search_kwargs[py_name] = value
        return ServiceConfig(
            port=raw.get("port", 8000),
            weights_path=raw.get("weightsPath"),
            data_dir=raw.get("dataDir", "data"),
            cache_size=raw.get("cacheSize", 64),
            max_upload_bytes=raw.get("maxUploadBytes", 100 * 1024 * 1024),
            object_types=tuple(raw.get("objectTypes", DEFAULT_OBJECT_TYPES)),
            search_defaults=SearchConfig(**search_kwargs),
        )


_SEARCH_FIELDS = {
    "strideFrames": "stride_frames",
    "lengthFactors": "length_factors",
    "k": "k",
    "nmsIou": "nms_iou",
    "maxAssignmentsPerWindow": "max_assignments_per_window",
    "ticksPerSecond": "ticks_per_second",
}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field_path: str | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.field_path = field_path

    def response(self) -> JSONResponse:
        payload: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.field_path is not None:
            payload["fieldPath"] = self.field_path
        return JSONResponse(status_code=self.status, content=payload)


def _invalid(message: str, field_path: str) -> ApiError:
    return ApiError(422, "invalid_query", message, field_path)


def _require_number(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _invalid("expected a number", path)
    if positive and value <= 0:
        raise _invalid("must be positive", path)
    return float(value)


def parse_visual_query(
    raw: Any, object_types: tuple[str, ...], path: str = "visualQuery"
) -> VisualQuery:
    """Validate the wire-format sketch and build the internal query."""
    if not isinstance(raw, dict):
        raise _invalid("expected an object", path)
    if raw.get("schemaVersion") != SCHEMA_VERSION:
        raise _invalid(f"schemaVersion must be {SCHEMA_VERSION}", f"{path}.schemaVersion")
    canvas_w = _require_number(raw.get("canvasW"), f"{path}.canvasW", positive=True)
    canvas_h = _require_number(raw.get("canvasH"), f"{path}.canvasH", positive=True)
    objects_raw = raw.get("objects")
    if not isinstance(objects_raw, list) or not objects_raw:
        raise _invalid("objects must be a non-empty list", f"{path}.objects")

    legal_types = set(object_types) | {"any"}
    objects = []
    seen_ids = set()
    for i, obj in enumerate(objects_raw):
        opath = f"{path}.objects[{i}]"
        if not isinstance(obj, dict):
            raise _invalid("expected an object", opath)
        obj_id = obj.get("id")
        if not isinstance(obj_id, str) or not obj_id:
            raise _invalid("id must be a non-empty string", f"{opath}.id")
        if obj_id in seen_ids:
            raise _invalid(f"duplicate object id {obj_id!r}", f"{opath}.id")
        seen_ids.add(obj_id)
        obj_type = obj.get("type")
        if obj_type not in legal_types:
            raise _invalid(f"unknown object type {obj_type!r}", f"{opath}.type")
        nominal_w = _require_number(obj.get("nominalW"), f"{opath}.nominalW", positive=True)
        nominal_h = _require_number(obj.get("nominalH"), f"{opath}.nominalH", positive=True)
        segments_raw = obj.get("segments")
        if not isinstance(segments_raw, list) or not segments_raw:
            raise _invalid("segments must be a non-empty list", f"{opath}.segments")

        segments = []
        for j, seg in enumerate(segments_raw):
            spath = f"{opath}.segments[{j}]"
            if not isinstance(seg, dict):
                raise _invalid("expected an object", spath)
            start = _require_number(seg.get("panelStart"), f"{spath}.panelStart")
            end = _require_number(seg.get("panelEnd"), f"{spath}.panelEnd")
            if not start < end:
                raise _invalid("panelStart must be before panelEnd", f"{spath}.panelStart")
            points_raw = seg.get("points")
            if not isinstance(points_raw, list) or len(points_raw) < 2:
                raise _invalid("points must list at least 2 samples", f"{spath}.points")
            points = []
            for p, pt in enumerate(points_raw):
                if (
                    not isinstance(pt, (list, tuple))
                    or len(pt) != 2
                    or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in pt)
                ):
                    raise _invalid("each point must be [x, y]", f"{spath}.points[{p}]")
                points.append((float(pt[0]), float(pt[1])))
            segments.append(
                QuerySegment(panel_start=start, panel_end=end, points=tuple(points))
            )
        for j, (a, b) in enumerate(zip(segments, segments[1:])):
            if b.panel_start < a.panel_end:
                raise _invalid(
                    "segments overlap in panel time", f"{opath}.segments[{j + 1}].panelStart"
                )
        objects.append(
            QueryObject(
                object_id=obj_id,
                object_type=obj_type,
                nominal_w=nominal_w,
                nominal_h=nominal_h,
                segments=tuple(segments),
            )
        )
    try:
        return VisualQuery(canvas_w=canvas_w, canvas_h=canvas_h, objects=tuple(objects))
    except GeometryError as exc:
        raise _invalid(str(exc), path) from exc


def visual_query_to_json(q: VisualQuery) -> dict:
    return {
        "schemaVersion": SCHEMA_VERSION,
        "canvasW": q.canvas_w,
        "canvasH": q.canvas_h,
        "objects": [
            {
                "id": o.object_id,
                "type": o.object_type,
                "nominalW": o.nominal_w,
                "nominalH": o.nominal_h,
                "segments": [
                    {
                        "panelStart": s.panel_start,
                        "panelEnd": s.panel_end,
                        "points": [[x, y] for x, y in s.points],
                    }
                    for s in o.segments
                ],
            }
            for o in q.objects
        ],
    }


def parse_search_overrides(raw: Any, defaults: SearchConfig) -> SearchConfig:
    if raw is None:
        return defaults
    if not isinstance(raw, dict):
        raise _invalid("expected an object", "searchOverrides")
    kwargs = {
        py_name: getattr(defaults, py_name) for py_name in _SEARCH_FIELDS.values()
    }
    for json_name, py_name in _SEARCH_FIELDS.items():
        if json_name not in raw:
            continue
        value = raw[json_name]
        if py_name == "length_factors":
            if not isinstance(value, list) or not value:
                raise _invalid("must be a non-empty list", f"searchOverrides.{json_name}")
            value = tuple(value)
        kwargs[py_name] = value
    try:
        return SearchConfig(**kwargs)
    except (MatchError, TypeError) as exc:
        raise _invalid(str(exc), "searchOverrides") from exc


@dataclass
class DatasetEntry:
    dataset_id: str
    name: str
    sequence: int
    store: TrackStore


class Registry:
    """Named, versioned datasets with atomic latest-pointer swaps."""

    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self.stores_dir = data_dir / "stores"
        self.stores_dir.mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()
        self.entries: dict[str, DatasetEntry] = {}
        self.sequence = 0
        self._load()

    @property
    def _registry_path(self) -> Path:
        return self.data_dir / "registry.json"

    def _load(self) -> None:
        if not self._registry_path.exists():
            return
        raw = json.loads(self._registry_path.read_text())
        self.sequence = raw.get("sequence", 0)
        for item in raw.get("datasets", []):
            path = self.stores_dir / f"{item['datasetId']}.jsonl"
            if not path.exists():
                continue
            store = load_store(path)
            self.entries[item["datasetId"]] = DatasetEntry(
                dataset_id=item["datasetId"],
                name=item["name"],
                sequence=item["sequence"],
                store=store,
            )

    def _persist_index(self) -> None:
        payload = {
            "sequence": self.sequence,
            "datasets": [
                {"datasetId": e.dataset_id, "name": e.name, "sequence": e.sequence}
                for e in self.entries.values()
            ],
        }
        self._registry_path.write_text(json.dumps(payload, indent=2, sort_keys=True))

    def add(self, name: str, store: TrackStore) -> DatasetEntry:
        dataset_id = uuid.uuid4().hex[:12]
        store = TrackStore(
            dataset_id=dataset_id,
            fps=store.fps,
            frame_count=store.frame_count,
            trajectories=store.trajectories,
            frame_index=store.frame_index,
        )
        save_store(store, self.stores_dir / f"{dataset_id}.jsonl")
        with self.lock:
            self.sequence += 1
            entry = DatasetEntry(
                dataset_id=dataset_id, name=name, sequence=self.sequence, store=store
            )
            self.entries[dataset_id] = entry
            self._persist_index()
        return entry

    def get(self, dataset_id: str) -> DatasetEntry | None:
        with self.lock:
            return self.entries.get(dataset_id)

    def latest_per_name(self) -> list[DatasetEntry]:
        with self.lock:
            latest: dict[str, DatasetEntry] = {}
            for entry in self.entries.values():
                cur = latest.get(entry.name)
                if cur is None or entry.sequence > cur.sequence:
                    latest[entry.name] = entry
            return sorted(latest.values(), key=lambda e: e.sequence)


class ResultCache:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.lock = threading.Lock()
        self.items: OrderedDict[str, dict] = OrderedDict()

    def put(self, key: str, value: dict) -> None:
        with self.lock:
            self.items[key] = value
            self.items.move_to_end(key)
            while len(self.items) > self.capacity:
                self.items.popitem(last=False)

    def get(self, key: str) -> dict | None:
        with self.lock:
            if key not in self.items:
                return None
            self.items.move_to_end(key)
            return self.items[key]


def _grid_preview(store: TrackStore, result: MatchResult, T: int) -> list[dict]:
    grid = assignment_grid(store, result.start_frame, result.end_frame, result.object_ids, T)
    previews = []
    if grid is None:
        return previews
    for i, obj_id in enumerate(result.object_ids):
        previews.append(
            {
                "objectId": obj_id,
                "objectType": store.trajectories[obj_id].object_type,
                "values": [[float(v) for v in row] for row in grid.values[i]],
                "mask": [bool(b) for b in grid.mask[i]],
            }
        )
    return previews


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="sketchmatch", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    data_dir = Path(config.data_dir)
    registry = Registry(data_dir)
    cache = ResultCache(config.cache_size)
    weights: EncoderWeights | None = None
    if config.weights_path and Path(config.weights_path).exists():
        weights = load_weights(config.weights_path)
    app.state.config = config
    app.state.registry = registry

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError):
        return exc.response()

    @app.get("/types")
    def list_types() -> dict:
        return {"types": list(config.object_types)}

    @app.get("/datasets")
    def list_datasets() -> dict:
        datasets = []
        for entry in registry.latest_per_name():
            datasets.append(
                {
                    "datasetId": entry.dataset_id,
                    "name": entry.name,
                    "fps": entry.store.fps,
                    "frameCount": entry.store.frame_count,
                    "objectCount": entry.store.object_count,
                    "typeHistogram": entry.store.type_histogram(),
                }
            )
        return {"datasets": datasets}

    @app.post("/datasets")
    async def upload_dataset(
        file: UploadFile = File(...),
        name: str = Form(...),
        fps: float | None = Form(None),
    ) -> dict:
        blob = await file.read()
        if len(blob) > config.max_upload_bytes:
            raise ApiError(413, "too_large", f"upload exceeds {config.max_upload_bytes} bytes")
        try:
            text = blob.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ApiError(400, "parse_error", f"not UTF-8 text: {exc}")
        stripped = text.lstrip()
        try:
            if stripped.startswith("{"):
                import tempfile

                with tempfile.NamedTemporaryFile(
                    "w", suffix=".jsonl", delete=False, encoding="utf-8"
                ) as tmp:
                    tmp.write(text)
                    tmp_path = tmp.name
                try:
                    store = load_store(tmp_path)
                finally:
                    Path(tmp_path).unlink(missing_ok=True)
            else:
                if fps is None or fps <= 0:
                    raise ApiError(
                        400, "missing_fps", "tracker uploads need a positive fps form field"
                    )
                trajectories = parse_mot(io.StringIO(text), fps=fps)
                if not trajectories:
                    raise ApiError(400, "parse_error", "file contains no trajectories")
                store = build_store(trajectories, fps=fps)
        except (StoreError, GeometryError) as exc:
            raise ApiError(400, "parse_error", str(exc)) from exc
        entry = registry.add(name, store)
        return {"datasetId": entry.dataset_id, "status": "ready"}

    @app.post("/queries")
    def run_query(body: dict) -> dict:
        if weights is None:
            raise ApiError(503, "no_weights", "service has no encoder weights configured")
        dataset_id = body.get("datasetId")
        if not isinstance(dataset_id, str):
            raise _invalid("datasetId must be a string", "datasetId")
        entry = registry.get(dataset_id)
        if entry is None:
            raise ApiError(404, "unknown_dataset", f"no dataset {dataset_id!r}")
        query = parse_visual_query(body.get("visualQuery"), config.object_types)
        cfg = parse_search_overrides(body.get("searchOverrides"), config.search_defaults)
        if "k" in body:
            k = body["k"]
            if isinstance(k, bool) or not isinstance(k, int) or k < 1:
                raise _invalid("k must be an integer >= 1", "k")
            cfg = SearchConfig(
                stride_frames=cfg.stride_frames,
                length_factors=cfg.length_factors,
                k=k,
                nms_iou=cfg.nms_iou,
                max_assignments_per_window=cfg.max_assignments_per_window,
                ticks_per_second=cfg.ticks_per_second,
            )
        if len(query.objects) > weights.config.max_objects:
            raise ApiError(
                409,
                "capacity_mismatch",
                f"query has {len(query.objects)} objects but the loaded weights "
                f"support at most {weights.config.max_objects}",
            )
        try:
            results = search(entry.store, query, weights, cfg)
        except (MatchError, GeometryError) as exc:
            raise ApiError(422, "query_failed", str(exc))

        query_id = uuid.uuid4().hex[:16]
        payload = {
            "queryId": query_id,
            "datasetId": dataset_id,
            "results": [
                {
                    "startFrame": r.start_frame,
                    "endFrame": r.end_frame,
                    "objectIds": list(r.object_ids),
                    "score": r.score,
                    "tracks": _grid_preview(entry.store, r, weights.config.T),
                }
                for r in results
            ],
            "queryEcho": {
                "visualQuery": visual_query_to_json(query),
                "spanFrames": query_span_frames(query, entry.store.fps, cfg),
                "k": cfg.k,
            },
        }
        cache.put(query_id, payload)
        return payload

    @app.get("/results/{query_id}")
    def get_results(query_id: str) -> dict:
        payload = cache.get(query_id)
        if payload is None:
            raise ApiError(404, "unknown_query", f"no cached results for {query_id!r}")
        return payload

    return app
