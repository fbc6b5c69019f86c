"""Demo stores with planted events for end-to-end retrieval checks.

Each builder lays one planted event among scripted distractor events on a
single store timeline and returns both the store and where the planted
event landed, so callers can verify that a sketch retrieves it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sketchmatch.simulator import (
    Actor,
    CameraConfig,
    LabeledClip,
    MotionPrimitive,
    SimulationError,
    SyntheticEvent,
    project,
    sample_camera,
)
from sketchmatch.store import ClipPlacement, TrackStore, store_from_clips

DEMO_FPS = 10.0


@dataclass(frozen=True)
class DemoStore:
    store: TrackStore
    planted: ClipPlacement
    placements: list[ClipPlacement]


def _car(primitives, start=(0.0, 0.0), heading=0.0, object_type="car"):
    size = (1.8, 1.5, 4.5) if object_type == "car" else (0.5, 1.7, 0.5)
    return Actor(
        object_type=object_type,
        size_3d=size,
        start_pos=start,
        start_heading_rad=heading,
        primitives=tuple(primitives),
    )


def _event(event_id, actors):
    duration = max(a.total_duration for a in actors)
    return SyntheticEvent(
        event_id=event_id, actors=tuple(actors), fps=DEMO_FPS, duration_s=duration
    )


def _render(events, planted_event_id, seed, camera_config=None) -> DemoStore:
    camera_config = camera_config or CameraConfig(
        jitter_amp_range_px=(0.0, 1.0), look_at_offset_m=2.0
    )
    clips: list[LabeledClip] = []
    for i, event in enumerate(events):
        pose = sample_camera((seed, i, 0), event, camera_config, azimuth_range=(0.0, 2 * math.pi))
        clip = project(event, pose, (seed, i, 1))
        clips.append(
            LabeledClip(
                event_id=event.event_id, camera_index=0, fps=event.fps, tracks=clip.tracks
            )
        )
    store, placements = store_from_clips(clips, fps=DEMO_FPS, dataset_id=f"demo-{seed}")
    planted = next(p for p in placements if p.event_id == planted_event_id)
    return DemoStore(store=store, planted=planted, placements=placements)


def turn_event(event_id, rng, direction: float, speed=None, angle=None) -> SyntheticEvent:
    """Straight, constant-curvature turn, straight; direction +1 turns left."""
    speed = speed if speed is not None else float(rng.uniform(4.0, 9.0))
    angle = angle if angle is not None else float(rng.uniform(math.pi / 3, math.pi * 0.55))
    heading = float(rng.uniform(0.0, 2.0 * math.pi))
    prims = [
        MotionPrimitive("straight", float(rng.uniform(1.2, 2.0)), speed),
        MotionPrimitive("turn", float(rng.uniform(1.5, 2.5)), speed, direction * angle),
        MotionPrimitive("straight", float(rng.uniform(0.8, 1.5)), speed),
    ]
    return _event(event_id, [_car(prims, heading=heading)])


def straight_event(event_id, rng) -> SyntheticEvent:
    heading = float(rng.uniform(0.0, 2.0 * math.pi))
    prims = [MotionPrimitive("straight", float(rng.uniform(3.5, 5.5)), float(rng.uniform(4.0, 9.0)))]
    return _event(event_id, [_car(prims, heading=heading)])


def build_left_turn_demo(seed: int = 11, n_right: int = 6, n_straight: int = 5) -> DemoStore:
    """Single left-turn event hidden among right turns and straight passes."""
    rng = np.random.default_rng(seed)
    events = [turn_event(0, rng, direction=+1.0)]
    next_id = 1
    for _ in range(n_right):
        events.append(turn_event(next_id, rng, direction=-1.0))
        next_id += 1
    for _ in range(n_straight):
        events.append(straight_event(next_id, rng))
        next_id += 1
    return _render(events, planted_event_id=0, seed=seed)


def crossing_event(event_id, rng, perpendicular: bool) -> SyntheticEvent:
    """Car and person moving through the same area, at 90 or 0 degrees."""
    car_heading = float(rng.uniform(0.0, 2.0 * math.pi))
    offset = math.pi / 2 if perpendicular else float(rng.choice([0.0, math.pi]))
    person_heading = car_heading + offset
    car_speed = float(rng.uniform(4.0, 8.0))
    person_speed = float(rng.uniform(1.0, 2.2))
    duration = float(rng.uniform(3.5, 5.0))
    # Both paths pass near the origin mid-event.
    car_start = (
        -car_speed * duration / 2 * math.cos(car_heading),
        -car_speed * duration / 2 * math.sin(car_heading),
    )
    person_start = (
        -person_speed * duration / 2 * math.cos(person_heading) + float(rng.uniform(-1, 1)),
        -person_speed * duration / 2 * math.sin(person_heading) + float(rng.uniform(-1, 1)),
    )
    car = _car([MotionPrimitive("straight", duration, car_speed)],
               start=car_start, heading=car_heading)
    person = _car([MotionPrimitive("straight", duration, person_speed)],
                  start=person_start, heading=person_heading, object_type="person")
    return _event(event_id, [car, person])


def build_crossing_demo(seed: int = 23, n_parallel: int = 7) -> DemoStore:
    """One perpendicular car/person crossing among parallel co-movers."""
    rng = np.random.default_rng(seed)
    events = [crossing_event(0, rng, perpendicular=True)]
    for i in range(1, n_parallel + 1):
        events.append(crossing_event(i, rng, perpendicular=False))
    return _render(events, planted_event_id=0, seed=seed)
