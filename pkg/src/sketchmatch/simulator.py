"""Synthetic labeled training data: 3D multi-object motion events recorded
by randomly posed virtual pinhole cameras.

2D clips rendered from different cameras of the same event form positive
pairs; clips from different events are negatives. Everything is a pure
function of its seed, so datasets regenerate byte-identically.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable

import numpy as np

from sketchmatch.geometry import BoundingBox, Trajectory

WORLD_UP = np.array([0.0, 1.0, 0.0])
MAX_CAMERA_ATTEMPTS = 100
MAX_PATH_ATTEMPTS = 100


class SimulationError(RuntimeError):
    """Raised when a configuration cannot produce a valid event or view."""


@dataclass(frozen=True)
class MotionPrimitive:
    """One path building block on the ground plane.

    kind: "straight", "turn", or "stop". Turns trace constant-curvature arcs;
    positive turn_angle_rad turns counterclockwise in plane coordinates, which
    renders as a leftward turn in image coordinates from any camera above the
    plane.
    """

    kind: str
    duration_s: float
    speed_mps: float = 0.0
    turn_angle_rad: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("straight", "turn", "stop"):
            raise SimulationError(f"unknown primitive kind {self.kind!r}")
        if self.duration_s <= 0:
            raise SimulationError("primitive duration must be positive")
        if self.speed_mps < 0:
            raise SimulationError("speed must be nonnegative")
        if abs(self.turn_angle_rad) > math.pi:
            raise SimulationError("turn angle must be within [-pi, pi]")


@dataclass(frozen=True)
class Actor:
    object_type: str
    size_3d: tuple[float, float, float]  # (w, h, d) meters
    start_pos: tuple[float, float]  # plane coordinates, meters
    start_heading_rad: float
    primitives: tuple[MotionPrimitive, ...]

    @property
    def total_duration(self) -> float:
        return sum(p.duration_s for p in self.primitives)


@dataclass(frozen=True)
class SyntheticEvent:
    event_id: int
    actors: tuple[Actor, ...]
    fps: float
    duration_s: float


@dataclass(frozen=True)
class CameraPose:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    focal: float
    image_w: int
    image_h: int
    jitter_amp: float

    def __post_init__(self) -> None:
        if self.focal <= 0:
            raise SimulationError("focal must be positive")
        if self.position[1] <= 0:
            raise SimulationError("camera must sit above the ground plane")
        if tuple(self.position) == tuple(self.look_at):
            raise SimulationError("camera position equals look_at")


@dataclass(frozen=True)
class LabeledClip:
    event_id: int
    camera_index: int
    fps: float
    tracks: tuple[Trajectory, ...]


@dataclass(frozen=True)
class ActorProfile:
    size_ranges: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    speed_range: tuple[float, float]


# Sizes are fixed per type so that event identity comes from motion, not
# from a size fingerprint that survives normalization across views.
DEFAULT_ACTOR_PROFILES: dict[str, ActorProfile] = {
    "car": ActorProfile(size_ranges=((1.8, 1.8), (1.5, 1.5), (4.5, 4.5)), speed_range=(2.0, 12.0)),
    "person": ActorProfile(size_ranges=((0.5, 0.5), (1.7, 1.7), (0.5, 0.5)), speed_range=(0.6, 2.5)),
}


@dataclass(frozen=True)
class SimConfig:
    fps: float = 10.0
    actor_count_range: tuple[int, int] = (1, 3)
    actor_types: tuple[str, ...] = ("car", "person")
    primitives_per_actor: tuple[int, int] = (2, 4)
    primitive_kinds: tuple[str, ...] = ("straight", "turn", "stop")
    kind_weights: tuple[float, ...] = (0.45, 0.4, 0.15)
    duration_range_s: tuple[float, float] = (1.0, 3.5)
    turn_angle_range_rad: tuple[float, float] = (math.pi / 6, math.pi * 0.9)
    start_radius_m: float = 12.0
    arena_half_extent_m: float = 60.0
    profiles: dict[str, ActorProfile] = field(
        default_factory=lambda: dict(DEFAULT_ACTOR_PROFILES)
    )

    def to_json(self) -> dict:
        d = asdict(self)
        d["profiles"] = {k: asdict(v) for k, v in self.profiles.items()}
        return d


@dataclass(frozen=True)
class CameraConfig:
    radius_range_m: tuple[float, float] = (12.0, 70.0)
    height_range_m: tuple[float, float] = (3.0, 40.0)
    focal_range_px: tuple[float, float] = (400.0, 1600.0)
    image_w: int = 1280
    image_h: int = 720
    jitter_amp_range_px: tuple[float, float] = (0.0, 4.0)
    # Ground-plane offset of the look-at point from the event centroid.
    look_at_offset_m: float = 8.0
    # Each camera view drops a random prefix and suffix of frames whose
    # combined share of the clip is drawn from this range.
    time_crop_range: tuple[float, float] = (0.0, 0.25)
    # Successive cameras of one event sit this far apart on the azimuth
    # ring (plus jitter), from a random per-event phase: guarantees the
    # views of a positive pair differ without forcing opposite sides.
    azimuth_spacing_rad: float = math.pi / 2.0
    azimuth_jitter_rad: float = math.pi / 6.0

    def to_json(self) -> dict:
        return asdict(self)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _plane_pose(
    start: np.ndarray, heading: float, primitives: Iterable[MotionPrimitive], t: float
) -> tuple[np.ndarray, float]:
    """Plane position and heading at time t along a primitive chain.

    Each primitive starts where the previous ended with the heading carried
    over; times past the end of the chain hold the final pose.
    """
    pos = start.astype(np.float64).copy()
    h = float(heading)
    remaining = t
    for p in primitives:
        dt = min(remaining, p.duration_s)
        if dt > 0:
            pos, h = _advance(pos, h, p, dt)
        remaining -= dt
        if remaining <= 0:
            break
    return pos, h


def _advance(
    pos: np.ndarray, heading: float, p: MotionPrimitive, dt: float
) -> tuple[np.ndarray, float]:
    if p.kind == "stop" or p.speed_mps == 0.0:
        return pos, heading
    if p.kind == "straight" or p.turn_angle_rad == 0.0:
        d = p.speed_mps * dt
        return pos + d * np.array([math.cos(heading), math.sin(heading)]), heading
    omega = p.turn_angle_rad / p.duration_s
    radius = p.speed_mps / omega
    h1 = heading + omega * dt
    dx = radius * (math.sin(h1) - math.sin(heading))
    dy = radius * (-math.cos(h1) + math.cos(heading))
    return pos + np.array([dx, dy]), h1


def actor_plane_path(actor: Actor, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Plane positions (n, 2) and headings (n,) of an actor at the given times."""
    start = np.asarray(actor.start_pos, dtype=np.float64)
    positions = np.empty((len(times), 2))
    headings = np.empty(len(times))
    for i, t in enumerate(times):
        pos, h = _plane_pose(start, actor.start_heading_rad, actor.primitives, float(t))
        positions[i] = pos
        headings[i] = h
    return positions, headings


def plane_to_world(p: np.ndarray) -> np.ndarray:
    """Embed plane coordinates (px, py) on the ground as world (px, 0, -py).

    The sign flip on the second axis makes counterclockwise plane motion
    appear counterclockwise in image coordinates (y down) as well, so
    positive turn angles look like left turns on screen.
    """
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros(p.shape[:-1] + (3,))
    out[..., 0] = p[..., 0]
    out[..., 2] = -p[..., 1]
    return out


def _sample_primitives(rng: np.random.Generator, cfg: SimConfig, speed_range) -> tuple[MotionPrimitive, ...]:
    lo, hi = cfg.primitives_per_actor
    if lo > hi or lo < 1:
        raise SimulationError("invalid primitives_per_actor range")
    n = int(rng.integers(lo, hi + 1))
    prims = []
    weights = np.asarray(cfg.kind_weights, dtype=np.float64)
    if len(weights) != len(cfg.primitive_kinds) or weights.sum() <= 0:
        raise SimulationError("kind_weights must match primitive_kinds")
    weights = weights / weights.sum()
    for _ in range(n):
        kind = str(rng.choice(np.asarray(cfg.primitive_kinds, dtype=object), p=weights))
        duration = float(rng.uniform(*cfg.duration_range_s))
        if kind == "stop":
            prims.append(MotionPrimitive(kind="stop", duration_s=duration))
            continue
        speed = float(rng.uniform(*speed_range))
        if kind == "straight":
            prims.append(MotionPrimitive(kind="straight", duration_s=duration, speed_mps=speed))
        else:
            mag = float(rng.uniform(*cfg.turn_angle_range_rad))
            sign = 1.0 if rng.random() < 0.5 else -1.0
            prims.append(
                MotionPrimitive(
                    kind="turn", duration_s=duration, speed_mps=speed, turn_angle_rad=sign * mag
                )
            )
    return tuple(prims)


def _path_in_arena(actor: Actor, cfg: SimConfig) -> bool:
    total = actor.total_duration
    times = np.linspace(0.0, total, max(2, int(total * cfg.fps) + 1))
    positions, _ = actor_plane_path(actor, times)
    return bool(np.all(np.abs(positions) <= cfg.arena_half_extent_m))


def gen_event(rng_seed, config: SimConfig, event_id: int = 0) -> SyntheticEvent:
    """Deterministically generate one multi-actor motion event."""
    rng = _rng(rng_seed)
    lo, hi = config.actor_count_range
    if lo > hi or lo < 1:
        raise SimulationError("invalid actor_count_range")
    if not config.actor_types:
        raise SimulationError("actor_types must be non-empty")
    n_actors = int(rng.integers(lo, hi + 1))

    actors = []
    for _ in range(n_actors):
        object_type = str(rng.choice(np.asarray(config.actor_types, dtype=object)))
        profile = config.profiles.get(object_type)
        if profile is None:
            raise SimulationError(f"no actor profile configured for type {object_type!r}")
        size = tuple(float(rng.uniform(a, b)) for a, b in profile.size_ranges)
        for _ in range(MAX_PATH_ATTEMPTS):
            start = rng.uniform(-config.start_radius_m, config.start_radius_m, size=2)
            heading = float(rng.uniform(0, 2 * math.pi))
            prims = _sample_primitives(rng, config, profile.speed_range)
            actor = Actor(
                object_type=object_type,
                size_3d=size,
                start_pos=(float(start[0]), float(start[1])),
                start_heading_rad=heading,
                primitives=prims,
            )
            if _path_in_arena(actor, config):
                break
        else:
            raise SimulationError("could not fit an actor path inside the arena")
        actors.append(actor)

    duration = max(a.total_duration for a in actors)
    return SyntheticEvent(
        event_id=event_id, actors=tuple(actors), fps=config.fps, duration_s=duration
    )


def event_centroid(event: SyntheticEvent) -> np.ndarray:
    starts = np.array([a.start_pos for a in event.actors])
    return plane_to_world(starts.mean(axis=0))


def camera_basis(pose: CameraPose) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right/up/forward unit vectors of the camera frame."""
    position = np.asarray(pose.position, dtype=np.float64)
    target = np.asarray(pose.look_at, dtype=np.float64)
    forward = target - position
    norm = np.linalg.norm(forward)
    if norm == 0:
        raise SimulationError("camera position equals look_at")
    forward = forward / norm
    right = np.cross(forward, WORLD_UP)
    r_norm = np.linalg.norm(right)
    if r_norm < 1e-12:
        right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
        r_norm = np.linalg.norm(right)
    right = right / r_norm
    up = np.cross(right, forward)
    return right, up, forward


def project_points(points: np.ndarray, pose: CameraPose) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole projection of world points (..., 3) to pixels (..., 2).

    Returns (pixels, depth). Image x grows to the camera's right, image y
    grows downward; the principal point is the image center.
    """
    right, up, forward = camera_basis(pose)
    d = np.asarray(points, dtype=np.float64) - np.asarray(pose.position)
    x = d @ right
    y = d @ up
    z = d @ forward
    with np.errstate(divide="ignore", invalid="ignore"):
        u = pose.image_w / 2 + pose.focal * x / z
        v = pose.image_h / 2 - pose.focal * y / z
    return np.stack([u, v], axis=-1), z


def sample_camera(
    rng_seed,
    event: SyntheticEvent,
    config: CameraConfig,
    azimuth_range: tuple[float, float] = (0.0, 2.0 * math.pi),
) -> CameraPose:
    """Random camera on an azimuth ring around the event, looking near its
    centroid.

    Resamples until every actor's start position projects inside the image;
    fails after MAX_CAMERA_ATTEMPTS. azimuth_range restricts the ring sector,
    letting callers force distinct viewpoints for the same event.
    """
    rng = _rng(rng_seed)
    centroid = event_centroid(event)
    starts_world = plane_to_world(np.array([a.start_pos for a in event.actors]))
    for _ in range(MAX_CAMERA_ATTEMPTS):
        azimuth = float(rng.uniform(*azimuth_range))
        radius = float(rng.uniform(*config.radius_range_m))
        height = float(rng.uniform(*config.height_range_m))
        focal = float(rng.uniform(*config.focal_range_px))
        jitter = float(rng.uniform(*config.jitter_amp_range_px))
        off = config.look_at_offset_m
        target = centroid + np.array(
            [rng.uniform(-off, off), 0.0, rng.uniform(-off, off)]
        )
        position = target + np.array(
            [radius * math.cos(azimuth), 0.0, radius * math.sin(azimuth)]
        )
        position[1] = max(height, 1e-6)
        pose = CameraPose(
            position=tuple(position),
            look_at=tuple(target),
            focal=focal,
            image_w=config.image_w,
            image_h=config.image_h,
            jitter_amp=jitter,
        )
        pixels, depth = project_points(starts_world, pose)
        inside = (
            (depth > 0)
            & (pixels[:, 0] >= 0)
            & (pixels[:, 0] <= config.image_w)
            & (pixels[:, 1] >= 0)
            & (pixels[:, 1] <= config.image_h)
        )
        if bool(np.all(inside)):
            return pose
    raise SimulationError("no camera pose kept the event in view")


def _actor_corners(
    positions: np.ndarray, headings: np.ndarray, size_3d: tuple[float, float, float]
) -> np.ndarray:
    """World-space corners (n_frames, 8, 3) of an actor's upright box."""
    w, h, d = size_3d
    along = np.stack([np.cos(headings), np.sin(headings)], axis=-1)
    lateral = np.stack([-np.sin(headings), np.cos(headings)], axis=-1)
    offsets = []
    for sa in (-0.5, 0.5):
        for sl in (-0.5, 0.5):
            offsets.append(sa * d * along + sl * w * lateral)
    footprint = positions[:, None, :] + np.stack(offsets, axis=1)  # (n, 4, 2) plane corners
    world = plane_to_world(footprint)  # (n, 4, 3) at ground height
    top = world.copy()
    top[..., 1] = h
    return np.concatenate([world, top], axis=1)


def project(event: SyntheticEvent, cam: CameraPose, jitter_seed) -> LabeledClip:
    """Render an event from one camera into per-actor box trajectories.

    Per frame, each actor's 3D box corners are projected and their 2D bounds
    taken; a per-frame global jitter models camera shake. Frames where the
    actor's center is behind the camera or its box falls fully outside the
    image are dropped from that actor's trajectory.
    """
    n_frames = max(2, int(round(event.fps * event.duration_s)))
    times = np.arange(n_frames) / event.fps
    rng = _rng(jitter_seed)
    jitter = rng.uniform(-cam.jitter_amp, cam.jitter_amp, size=(n_frames, 2))

    tracks = []
    for actor in event.actors:
        positions, headings = actor_plane_path(actor, times)
        corners = _actor_corners(positions, headings, actor.size_3d)  # (n, 8, 3)
        centers = corners.mean(axis=1)
        pixels, depth = project_points(corners, cam)
        _, center_depth = project_points(centers, cam)

        boxes = []
        for f in range(n_frames):
            if center_depth[f] <= 1e-9 or np.any(depth[f] <= 1e-9):
                continue
            u_min, v_min = pixels[f].min(axis=0) + jitter[f]
            u_max, v_max = pixels[f].max(axis=0) + jitter[f]
            if u_max < 0 or u_min > cam.image_w or v_max < 0 or v_min > cam.image_h:
                continue
            boxes.append(
                BoundingBox(
                    frame=f,
                    cx=float((u_min + u_max) / 2),
                    cy=float((v_min + v_max) / 2),
                    w=float(max(u_max - u_min, 1e-6)),
                    h=float(max(v_max - v_min, 1e-6)),
                )
            )
        if boxes:
            tracks.append(
                Trajectory(
                    object_id=str(len(tracks)),
                    object_type=actor.object_type,
                    boxes=tuple(boxes),
                )
            )
    if not tracks:
        raise SimulationError("event not visible")
    return LabeledClip(
        event_id=event.event_id, camera_index=0, fps=event.fps, tracks=tuple(tracks)
    )


def config_hash(sim: SimConfig, cam: CameraConfig) -> str:
    payload = json.dumps(
        {"sim": sim.to_json(), "camera": cam.to_json()}, sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def clip_record(clip: LabeledClip, ndigits: int = 3) -> dict:
    return {
        "event_id": clip.event_id,
        "camera_index": clip.camera_index,
        "fps": clip.fps,
        "tracks": [
            {
                "object_type": tr.object_type,
                "boxes": [
                    [b.frame, round(b.cx, ndigits), round(b.cy, ndigits),
                     round(b.w, ndigits), round(b.h, ndigits)]
                    for b in tr.boxes
                ],
            }
            for tr in clip.tracks
        ],
    }


def record_to_clip(record: dict) -> LabeledClip:
    tracks = []
    for i, tr in enumerate(record["tracks"]):
        boxes = tuple(
            BoundingBox(frame=int(f), cx=float(cx), cy=float(cy), w=float(w), h=float(h))
            for f, cx, cy, w, h in tr["boxes"]
        )
        tracks.append(Trajectory(object_id=str(i), object_type=tr["object_type"], boxes=boxes))
    return LabeledClip(
        event_id=int(record["event_id"]),
        camera_index=int(record["camera_index"]),
        fps=float(record["fps"]),
        tracks=tuple(tracks),
    )


def generate_clips(
    rng_seed: int,
    n_events: int,
    cams_per_event: int,
    sim_config: SimConfig | None = None,
    camera_config: CameraConfig | None = None,
) -> list[LabeledClip]:
    """All clips for n_events x cams_per_event, ordered by (event, camera)."""
    sim_config = sim_config or SimConfig()
    camera_config = camera_config or CameraConfig()
    clips = []
    for e in range(n_events):
        event_ss, cams_ss, jitter_ss, crops_ss, phase_ss = np.random.SeedSequence(
            (rng_seed, e)
        ).spawn(5)
        event = gen_event(event_ss, sim_config, event_id=e)
        cam_children = cams_ss.spawn(cams_per_event)
        jit_children = jitter_ss.spawn(cams_per_event)
        crop_children = crops_ss.spawn(cams_per_event)
        phase = float(_rng(phase_ss).uniform(0.0, 2.0 * math.pi))
        for c in range(cams_per_event):
            base = phase + c * camera_config.azimuth_spacing_rad
            pose = sample_camera(
                cam_children[c], event, camera_config,
                azimuth_range=(base, base + camera_config.azimuth_jitter_rad),
            )
            clip = project(event, pose, jit_children[c])
            clip = _crop_clip(clip, camera_config.time_crop_range, crop_children[c])
            clips.append(
                LabeledClip(
                    event_id=e, camera_index=c, fps=clip.fps, tracks=clip.tracks
                )
            )
    return clips


def _crop_clip(
    clip: LabeledClip, crop_range: tuple[float, float], rng_seed
) -> LabeledClip:
    """Drop a random prefix and suffix of a clip's frames (view-level crop)."""
    lo_frac, hi_frac = crop_range
    if hi_frac <= 0:
        return clip
    rng = _rng(rng_seed)
    total = float(rng.uniform(lo_frac, hi_frac))
    front = float(rng.uniform(0.0, 1.0)) * total
    first = min(tr.first_frame for tr in clip.tracks)
    last = max(tr.last_frame for tr in clip.tracks)
    n = last - first + 1
    keep_lo = first + int(math.floor(n * front))
    keep_hi = last - int(math.floor(n * (total - front)))
    tracks = []
    for tr in clip.tracks:
        kept = tuple(b for b in tr.boxes if keep_lo <= b.frame <= keep_hi)
        if kept:
            tracks.append(Trajectory(tr.object_id, tr.object_type, kept))
    if not tracks:
        return clip
    return LabeledClip(
        event_id=clip.event_id,
        camera_index=clip.camera_index,
        fps=clip.fps,
        tracks=tuple(tracks),
    )


def make_dataset(
    rng_seed: int,
    n_events: int,
    cams_per_event: int,
    out_path: str | Path,
    sim_config: SimConfig | None = None,
    camera_config: CameraConfig | None = None,
) -> list[LabeledClip]:
    """Generate clips and write the line-delimited dataset file.

    The first line is a manifest with the seed, config hash, and counts;
    each following line is one clip record.
    """
    if n_events < 2 or cams_per_event < 2:
        raise SimulationError("need at least 2 events and 2 cameras per event")
    sim_config = sim_config or SimConfig()
    camera_config = camera_config or CameraConfig()
    clips = generate_clips(rng_seed, n_events, cams_per_event, sim_config, camera_config)

    manifest = {
        "manifest": {
            "seed": rng_seed,
            "config_hash": config_hash(sim_config, camera_config),
            "n_events": n_events,
            "cams_per_event": cams_per_event,
            "n_clips": len(clips),
            "fps": sim_config.fps,
        }
    }
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with out_path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
            for clip in clips:
                fh.write(
                    json.dumps(clip_record(clip), sort_keys=True, separators=(",", ":")) + "\n"
                )
    except OSError as exc:
        raise SimulationError(f"cannot write dataset to {out_path}: {exc}") from exc
    return clips


def load_dataset(path: str | Path) -> tuple[dict, list[LabeledClip]]:
    """Read a dataset file back into its manifest and clips."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SimulationError(f"cannot read dataset at {path}: {exc}") from exc
    if not lines:
        raise SimulationError(f"dataset at {path} is empty")
    header = json.loads(lines[0])
    if "manifest" not in header:
        raise SimulationError(f"dataset at {path} missing manifest header")
    clips = [record_to_clip(json.loads(line)) for line in lines[1:] if line.strip()]
    return header["manifest"], clips
