from __future__ import annotations

import io
import json

import numpy as np
import pytest

from sketchmatch.geometry import BoundingBox, Trajectory
from sketchmatch.simulator import make_dataset
from sketchmatch.store import (
    StoreError,
    build_store,
    clip_to_grid,
    load_store,
    parse_mot,
    save_store,
    store_from_clips,
)


def traj(object_id, frames, object_type="car", base=0.0):
    boxes = tuple(
        BoundingBox(frame=f, cx=base + f, cy=2.0 * f, w=10, h=8) for f in frames
    )
    return Trajectory(object_id=object_id, object_type=object_type, boxes=boxes)


class TestParseMot:
    def test_corner_to_center_conversion(self):
        lines = io.StringIO("1,7,100,200,50,40,0.9,3\n")
        (tr,) = parse_mot(lines, fps=10, type_map={3: "car"})
        assert tr.object_id == "7"
        assert tr.object_type == "car"
        box = tr.boxes[0]
        assert box.frame == 0  # 1-based on disk
        assert box.cx == pytest.approx(125.0)
        assert box.cy == pytest.approx(220.0)
        assert box.w == 50 and box.h == 40

    def test_empty_stream(self):
        assert parse_mot(io.StringIO(""), fps=10) == []

    def test_rows_sorted_by_frame(self):
        lines = io.StringIO("5,1,0,0,10,10,1,3\n3,1,5,5,10,10,1,3\n")
        (tr,) = parse_mot(lines, fps=10, type_map={3: "car"})
        assert [b.frame for b in tr.boxes] == [2, 4]

    def test_malformed_line_reports_line_number(self):
        lines = io.StringIO("1,1,0,0,10,10,1,3\nnot,a,number,x,y,z\n")
        with pytest.raises(StoreError, match="line 2"):
            parse_mot(lines, fps=10)

    def test_duplicate_keeps_highest_confidence(self):
        lines = io.StringIO(
            "1,1,0,0,10,10,0.5,3\n1,1,100,100,20,20,0.9,3\n2,1,5,5,10,10,0.9,3\n"
        )
        (tr,) = parse_mot(lines, fps=10, type_map={3: "car"})
        assert tr.boxes[0].cx == pytest.approx(110.0)  # higher-conf row won

    def test_confidence_threshold_drops_rows(self):
        lines = io.StringIO("1,1,0,0,10,10,0.2,3\n2,1,5,5,10,10,0.8,3\n")
        (tr,) = parse_mot(lines, fps=10, type_map={3: "car"}, min_conf=0.5)
        assert len(tr.boxes) == 1
        assert tr.boxes[0].frame == 1

    def test_unknown_class_becomes_any(self):
        lines = io.StringIO("1,1,0,0,10,10,1,99\n2,1,1,1,10,10,1,99\n")
        (tr,) = parse_mot(lines, fps=10, type_map={3: "car"})
        assert tr.object_type == "any"


class TestBuildStore:
    def test_index_covers_exactly_the_span(self):
        store = build_store([traj("a", [0, 1, 2])], fps=10)
        assert store.frame_count == 3
        for f in range(3):
            assert store.frame_index[f] == frozenset({"a"})
        assert 3 not in store.frame_index

    def test_overlapping_objects_share_index_entries(self):
        store = build_store([traj("a", [0, 5]), traj("b", [5, 9])], fps=10)
        assert store.frame_index[5] == frozenset({"a", "b"})
        assert store.frame_index[0] == frozenset({"a"})

    def test_empty_input_rejected(self):
        with pytest.raises(StoreError, match="no trajectories"):
            build_store([], fps=10)

    def test_index_consistency_exhaustive(self):
        rng = np.random.default_rng(0)
        trajs = []
        for i in range(6):
            start = int(rng.integers(0, 20))
            length = int(rng.integers(2, 15))
            trajs.append(traj(f"t{i}", range(start, start + length)))
        store = build_store(trajs, fps=5)
        for f in range(store.frame_count):
            expected = {
                t.object_id
                for t in trajs
                if t.first_frame <= f <= t.last_frame
            }
            assert store.frame_index.get(f, frozenset()) == frozenset(expected)


class TestPersistence:
    def test_round_trip_deep_equal(self, tmp_path):
        store = build_store(
            [traj("a", [0, 1, 2], base=0.123456789), traj("b", [4, 7], "person")],
            fps=12.5,
            dataset_id="roundtrip",
        )
        path = tmp_path / "store.jsonl"
        save_store(store, path)
        loaded = load_store(path)
        assert loaded.dataset_id == store.dataset_id
        assert loaded.fps == store.fps
        assert loaded.frame_count == store.frame_count
        assert loaded.frame_index == store.frame_index
        assert loaded.trajectories == store.trajectories

    def test_box_values_bit_exact(self, tmp_path):
        values = [0.1 + 0.2, 1 / 3, 123456.789012345, 2**-30 + 5]
        boxes = tuple(
            BoundingBox(frame=i, cx=v, cy=v * 7, w=abs(v) + 1, h=1.0)
            for i, v in enumerate(values)
        )
        store = build_store(
            [Trajectory(object_id="x", object_type="car", boxes=boxes)], fps=1
        )
        path = tmp_path / "store.jsonl"
        save_store(store, path)
        loaded = load_store(path)
        for b1, b2 in zip(boxes, loaded.trajectories["x"].boxes):
            assert b1 == b2

    def test_corrupt_header_names_the_field(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"store": {"version": 1, "dataset_id": "x", "fps": 10}}\n')
        with pytest.raises(StoreError, match="frame_count"):
            load_store(path)

    def test_dataset_file_ingests_as_store(self, tmp_path):
        path = tmp_path / "data.jsonl"
        clips = make_dataset(3, 2, 2, path)
        store = load_store(path)
        assert store.object_count == sum(len(c.tracks) for c in clips)
        # Clips are laid end to end, so the store spans all of them.
        spans = [max(tr.last_frame for tr in c.tracks) + 1 for c in clips]
        assert store.frame_count == sum(spans)


class TestStoreFromClips:
    def test_placements_track_offsets(self, tmp_path):
        clips = make_dataset(11, 2, 2, tmp_path / "d.jsonl")
        store, placements = store_from_clips(clips, fps=10)
        assert len(placements) == 4
        assert placements[0].start_frame == 0
        for prev, cur in zip(placements, placements[1:]):
            assert cur.start_frame == prev.end_frame + 1
        for p in placements:
            for obj_id in p.object_ids:
                tr = store.trajectories[obj_id]
                assert p.start_frame <= tr.first_frame <= tr.last_frame <= p.end_frame

    def test_clip_to_grid_shapes(self, tmp_path):
        clips = make_dataset(5, 2, 2, tmp_path / "d.jsonl")
        grid = clip_to_grid(clips[0], T=16)
        assert grid.T == 16
        assert grid.num_objects == len(clips[0].tracks)
        assert grid.mask.any(axis=1).all()
