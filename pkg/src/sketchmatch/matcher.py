"""Sliding-window similarity search over a trajectory store.

Candidate windows at several lengths and strides are paired with type-legal
object assignments, featurized, scored against the query embedding by
cosine similarity, and reduced with greedy temporal NMS. A naive
brute-force twin re-derives enumeration and selection for verification,
and a dynamic-time-warping distance serves as a training-free baseline.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from sketchmatch.encoder.model import EncoderWeights, cosine, embed
from sketchmatch.geometry import (
    ClipWindow,
    FeatureGrid,
    GeometryError,
    Trajectory,
    VisualQuery,
    query_to_grid,
    temporal_iou,
    window_to_grid,
)
from sketchmatch.store import TrackStore

ORACLE_MAX_OBJECTS = 10
ORACLE_MAX_FRAMES = 2000


class MatchError(ValueError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    stride_frames: int = 4
    length_factors: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
    k: int = 10
    nms_iou: float = 0.5
    max_assignments_per_window: int = 256
    # None maps 1 panel tick to 1 store frame; otherwise ticks are seconds
    # scaled by this rate and converted at the store's fps.
    ticks_per_second: float | None = None

    def __post_init__(self) -> None:
        if self.stride_frames < 1:
            raise MatchError("stride_frames must be >= 1")
        if not self.length_factors or any(f <= 0 for f in self.length_factors):
            raise MatchError("length_factors must be positive")
        if not 0.0 <= self.nms_iou <= 1.0:
            raise MatchError("nms_iou must be in [0, 1]")
        if self.k < 1:
            raise MatchError("k must be >= 1")
        if self.max_assignments_per_window < 1:
            raise MatchError("max_assignments_per_window must be >= 1")


@dataclass(frozen=True)
class MatchResult:
    start_frame: int
    end_frame: int
    object_ids: tuple[str, ...]
    score: float


def query_span_frames(query: VisualQuery, fps: float, cfg: SearchConfig) -> int:
    lo, hi = query.panel_span
    ticks = hi - lo
    frames = ticks if cfg.ticks_per_second is None else ticks * fps / cfg.ticks_per_second
    return max(2, int(math.floor(frames + 0.5)))


def _span_overlap_fraction(tr: Trajectory, start: int, end: int) -> float:
    inter = min(tr.last_frame, end) - max(tr.first_frame, start) + 1
    return max(inter, 0) / (end - start + 1)


def _role_candidates(
    store: TrackStore, query: VisualQuery, start: int, end: int
) -> list[list[str]]:
    roles = []
    for obj in query.objects:
        ids = []
        for obj_id in sorted(store.trajectories):
            tr = store.trajectories[obj_id]
            if obj.object_type != "any" and tr.object_type != obj.object_type:
                continue
            if _span_overlap_fraction(tr, start, end) < 0.5:
                continue
            ids.append(obj_id)
        roles.append(ids)
    return roles


def candidate_lengths(span: int, cfg: SearchConfig) -> list[int]:
    return [max(2, int(math.floor(span * f + 0.5))) for f in cfg.length_factors]


def enumerate_candidates(
    store: TrackStore, query: VisualQuery, cfg: SearchConfig
) -> Iterator[tuple[tuple[int, int], tuple[str, ...]]]:
    """Stream (window, assignment) candidates.

    Windows slide by stride_frames at each candidate length; assignments are
    ordered tuples of distinct, type-matching object ids whose trajectory
    spans cover at least half the window, in lexicographic id order and
    truncated per window. Duplicate windows from colliding length factors
    are emitted once.
    """
    span = query_span_frames(query, store.fps, cfg)
    seen: set[tuple[int, int, tuple[str, ...]]] = set()
    for ell in candidate_lengths(span, cfg):
        if ell > store.frame_count:
            continue
        for start in range(0, store.frame_count - ell + 1, cfg.stride_frames):
            end = start + ell - 1
            roles = _role_candidates(store, query, start, end)
            if any(not r for r in roles):
                continue
            emitted = 0
            for combo in itertools.product(*roles):
                if len(set(combo)) != len(combo):
                    continue
                if emitted >= cfg.max_assignments_per_window:
                    break
                emitted += 1
                key = (start, end, combo)
                if key in seen:
                    continue
                seen.add(key)
                yield (start, end), combo


def assignment_grid(
    store: TrackStore, start: int, end: int, assignment: tuple[str, ...], T: int
) -> FeatureGrid | None:
    """Featurize a candidate window, or None if a track is too sparse there."""
    slices = []
    for obj_id in assignment:
        sl = store.trajectories[obj_id].slice(start, end)
        if sl is None or len(sl.boxes) < 2:
            return None
        slices.append(sl)
    window = ClipWindow(start_frame=start, end_frame=end, tracks=tuple(slices))
    return window_to_grid(window, T=T)


def _select_results(
    scored: list[MatchResult], k: int, nms_iou: float
) -> list[MatchResult]:
    """Greedy score-ordered NMS keyed on shared object ids."""
    ordered = sorted(
        scored, key=lambda r: (-r.score, r.start_frame, r.object_ids)
    )
    accepted: list[MatchResult] = []
    for cand in ordered:
        cand_ids = set(cand.object_ids)
        suppressed = False
        for acc in accepted:
            if cand_ids.isdisjoint(acc.object_ids):
                continue
            iou = temporal_iou(
                (cand.start_frame, cand.end_frame), (acc.start_frame, acc.end_frame)
            )
            if iou > nms_iou:
                suppressed = True
                break
        if not suppressed:
            accepted.append(cand)
            if len(accepted) >= k:
                break
    return accepted


def _check_query_capacity(query: VisualQuery, weights: EncoderWeights) -> None:
    if len(query.objects) > weights.config.max_objects:
        raise MatchError(
            f"query has {len(query.objects)} objects but weights support "
            f"at most {weights.config.max_objects}"
        )


def search(
    store: TrackStore,
    query: VisualQuery,
    weights: EncoderWeights,
    cfg: SearchConfig | None = None,
) -> list[MatchResult]:
    """Top-k candidate windows by embedding similarity, NMS-deduplicated."""
    if store is None or not store.trajectories:
        raise MatchError("store is not initialized")
    cfg = cfg or SearchConfig()
    _check_query_capacity(query, weights)
    q_emb = embed(weights, query_to_grid(query, T=weights.config.T))

    scored: list[MatchResult] = []
    for (start, end), assignment in enumerate_candidates(store, query, cfg):
        grid = assignment_grid(store, start, end, assignment, weights.config.T)
        if grid is None:
            continue
        score = cosine(q_emb, embed(weights, grid))
        scored.append(MatchResult(start, end, assignment, score))
    return _select_results(scored, cfg.k, cfg.nms_iou)


def brute_force_search(
    store: TrackStore,
    query: VisualQuery,
    weights: EncoderWeights,
    cfg: SearchConfig | None = None,
) -> list[MatchResult]:
    """Naive full-enumeration twin of search() for verification.

    Independently re-derives window enumeration, assignment filtering, and
    NMS selection; must agree with search() exactly on guarded-scale stores.
    """
    if store is None or not store.trajectories:
        raise MatchError("store is not initialized")
    cfg = cfg or SearchConfig()
    if store.object_count > ORACLE_MAX_OBJECTS or store.frame_count > ORACLE_MAX_FRAMES:
        raise MatchError("oracle scale exceeded")
    _check_query_capacity(query, weights)
    q_emb = embed(weights, query_to_grid(query, T=weights.config.T))

    all_ids = sorted(store.trajectories)
    n_roles = len(query.objects)
    span = query_span_frames(query, store.fps, cfg)
    scored: list[MatchResult] = []
    seen: set[tuple[int, int, tuple[str, ...]]] = set()
    for factor in cfg.length_factors:
        ell = max(2, int(math.floor(span * factor + 0.5)))
        start = 0
        while start + ell - 1 <= store.frame_count - 1:
            end = start + ell - 1
            kept = 0
            for combo in itertools.permutations(all_ids, n_roles):
                ok = True
                for obj, obj_id in zip(query.objects, combo):
                    tr = store.trajectories[obj_id]
                    if obj.object_type != "any" and tr.object_type != obj.object_type:
                        ok = False
                        break
                    covered = min(tr.last_frame, end) - max(tr.first_frame, start) + 1
                    if max(covered, 0) / ell < 0.5:
                        ok = False
                        break
                if not ok:
                    continue
                if kept >= cfg.max_assignments_per_window:
                    break
                kept += 1
                key = (start, end, combo)
                if key in seen:
                    continue
                seen.add(key)
                grid = assignment_grid(store, start, end, combo, weights.config.T)
                if grid is None:
                    continue
                score = cosine(q_emb, embed(weights, grid))
                scored.append(MatchResult(start, end, combo, score))
            start += cfg.stride_frames
    return _select_results(scored, cfg.k, cfg.nms_iou)


def _carry_fill(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Replace masked steps per object with the last valid value (or the
    first valid one for leading gaps)."""
    out = values.copy()
    for o in range(values.shape[0]):
        valid = np.flatnonzero(mask[o])
        if valid.size == 0:
            continue
        last = valid[0]  # leading gaps take the first valid step
        for t in range(values.shape[1]):
            if mask[o, t]:
                last = t
            else:
                out[o, t] = values[o, last]
    return out


def dtw_distance(a: FeatureGrid, b: FeatureGrid) -> float:
    """Dynamic-time-warping distance between two grids.

    Per-step cost is the mean over objects of the Euclidean distance between
    the (cx, cy, w, h) vectors; masked steps are treated as absent via
    last-valid carry. Standard O(T^2) unit-step recurrence.
    """
    if a.num_objects != b.num_objects:
        raise MatchError(
            f"object counts differ: {a.num_objects} vs {b.num_objects}"
        )
    va = _carry_fill(a.values, a.mask)
    vb = _carry_fill(b.values, b.mask)
    ta, tb = a.T, b.T
    # cost[i, j]: mean object distance between step i of a and step j of b
    diff = va[:, :, None, :] - vb[:, None, :, :]
    cost = np.sqrt((diff**2).sum(axis=-1)).mean(axis=0)

    acc = np.full((ta + 1, tb + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, ta + 1):
        for j in range(1, tb + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(
                acc[i - 1, j], acc[i, j - 1], acc[i - 1, j - 1]
            )
    return float(acc[ta, tb])
