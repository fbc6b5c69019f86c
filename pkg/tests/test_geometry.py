from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchmatch.geometry import (
    BoundingBox,
    ClipWindow,
    GeometryError,
    QueryObject,
    QuerySegment,
    Trajectory,
    VisualQuery,
    normalize,
    query_to_grid,
    query_to_tracks,
    resample,
    temporal_iou,
    window_to_grid,
)


def traj(points, object_id="obj", object_type="car"):
    return Trajectory(
        object_id=object_id,
        object_type=object_type,
        boxes=tuple(BoundingBox(frame=f, cx=cx, cy=cy, w=w, h=h) for f, cx, cy, w, h in points),
    )


def piecewise_oracle(points, pos):
    """Independent piecewise-linear interpolation oracle, one channel."""
    frames = [p[0] for p in points]
    if pos <= frames[0]:
        return points[0][1]
    if pos >= frames[-1]:
        return points[-1][1]
    for (f0, v0), (f1, v1) in zip(points, points[1:]):
        if f0 <= pos <= f1:
            t = (pos - f0) / (f1 - f0)
            return v0 + t * (v1 - v0)
    raise AssertionError("unreachable")


class TestResample:
    def test_linear_midpoint(self):
        t = traj([(0, 0, 0, 10, 10), (10, 10, 0, 10, 10)])
        values, mask = resample(t, (0, 10), 3)
        np.testing.assert_allclose(values[:, 0], [0, 5, 10])
        np.testing.assert_allclose(values[:, 1], [0, 0, 0])
        assert mask.all()

    def test_single_box_degenerate_range(self):
        t = traj([(5, 3, 4, 2, 2)])
        values, mask = resample(t, (5, 5), 2)
        np.testing.assert_allclose(values, [[3, 4, 2, 2], [3, 4, 2, 2]])
        assert mask.all()

    def test_piecewise_path(self):
        # Oracle: hand-evaluated piecewise-linear interpolation at each position.
        pts = [(0, 0, 0, 2, 2), (4, 8, 0, 2, 2), (8, 8, 8, 2, 2)]
        t = traj(pts)
        values, mask = resample(t, (0, 8), 5)
        cx_pts = [(0, 0), (4, 8), (8, 8)]
        cy_pts = [(0, 0), (4, 0), (8, 8)]
        expected_cx = [piecewise_oracle(cx_pts, p) for p in (0, 2, 4, 6, 8)]
        expected_cy = [piecewise_oracle(cy_pts, p) for p in (0, 2, 4, 6, 8)]
        assert expected_cx == [0, 4, 8, 8, 8]
        assert expected_cy == [0, 0, 0, 4, 8]
        np.testing.assert_allclose(values[:, 0], expected_cx)
        np.testing.assert_allclose(values[:, 1], expected_cy)
        assert mask.all()

    def test_out_of_coverage_masked_and_endpoint_filled(self):
        t = traj([(4, 1, 2, 3, 3), (6, 5, 2, 3, 3)])
        values, mask = resample(t, (0, 10), 11)
        assert list(mask) == [False] * 4 + [True] * 3 + [False] * 4
        np.testing.assert_allclose(values[:4, 0], 1.0)  # nearest endpoint fill
        np.testing.assert_allclose(values[7:, 0], 5.0)

    def test_idempotent_on_uniform_input(self):
        rng = np.random.default_rng(0)
        T = 9
        boxes = [(f, *rng.uniform(1, 100, size=4)) for f in range(T)]
        t = traj(boxes)
        v1, m1 = resample(t, (0, T - 1), T)
        np.testing.assert_allclose(v1, [b[1:] for b in boxes], atol=1e-9)
        assert m1.all()

    def test_errors(self):
        t = traj([(0, 0, 0, 1, 1)])
        with pytest.raises(GeometryError, match="invalid resample length"):
            resample(t, (0, 1), 1)
        with pytest.raises(GeometryError, match="empty trajectory"):
            Trajectory(object_id="x", object_type="car", boxes=())


class TestNormalize:
    def test_corner_extent_oracle(self):
        # One object moving (0,0) -> (100,0), constant 10x10 boxes.
        # Corner extent: x in [-5, 105] (width 110), y in [-5, 5] (height 10).
        # Scale 1/110, translate by corner minimum (-5, -5).
        values = np.array([[[0, 0, 10, 10], [100, 0, 10, 10]]], dtype=float)
        mask = np.ones((1, 2), dtype=bool)
        grid = normalize(values, mask)
        np.testing.assert_allclose(grid.values[0, 0], [5 / 110, 5 / 110, 10 / 110, 10 / 110])
        np.testing.assert_allclose(grid.values[0, 1], [105 / 110, 5 / 110, 10 / 110, 10 / 110])

    def test_translation_invariance_exact(self):
        rng = np.random.default_rng(1)
        # Dyadic inputs: translation enters only via exact float subtraction.
        values = rng.integers(0, 512, size=(2, 7, 4)).astype(float) / 4.0
        values[..., 2:] += 1.0
        mask = rng.random((2, 7)) < 0.8
        mask[:, 0] = True
        base = normalize(values, mask)
        shifted = values.copy()
        shifted[..., 0] += 37.0
        shifted[..., 1] -= 12.0
        moved = normalize(shifted, mask)
        assert np.array_equal(base.values, moved.values)
        assert np.array_equal(base.mask, moved.mask)

    def test_uniform_scale_invariance(self):
        rng = np.random.default_rng(2)
        values = rng.uniform(-50, 50, size=(3, 5, 4))
        values[..., 2:] = rng.uniform(0.5, 10, size=(3, 5, 2))
        mask = np.ones((3, 5), dtype=bool)
        base = normalize(values, mask)
        scaled = normalize(values * 3.0, mask)
        np.testing.assert_allclose(base.values, scaled.values, atol=1e-9)

    def test_degenerate_extent_maps_to_center(self):
        values = np.zeros((1, 3, 4))
        mask = np.ones((1, 3), dtype=bool)
        grid = normalize(values, mask)
        np.testing.assert_allclose(grid.values[..., :2], 0.5)
        np.testing.assert_allclose(grid.values[..., 2:], 0.0)

    def test_empty_window_errors(self):
        with pytest.raises(GeometryError, match="empty window"):
            normalize(np.zeros((1, 3, 4)), np.zeros((1, 3), dtype=bool))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_masked_centers_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        n_obj = int(rng.integers(1, 4))
        T = int(rng.integers(2, 12))
        values = rng.uniform(-1000, 1000, size=(n_obj, T, 4))
        values[..., 2:] = rng.uniform(1e-3, 50, size=(n_obj, T, 2))
        mask = rng.random((n_obj, T)) < 0.7
        if not mask.any():
            mask[0, 0] = True
        grid = normalize(values, mask)
        centers = grid.values[..., :2][grid.mask]
        assert np.all(centers >= -1e-9)
        assert np.all(centers <= 1 + 1e-9)
        assert np.isfinite(grid.values[grid.mask]).all()


def one_segment_query(points, object_type="car", panel=(0.0, 10.0), nominal=(8.0, 8.0)):
    return VisualQuery(
        canvas_w=800,
        canvas_h=600,
        objects=(
            QueryObject(
                object_id="q0",
                object_type=object_type,
                nominal_w=nominal[0],
                nominal_h=nominal[1],
                segments=(
                    QuerySegment(panel_start=panel[0], panel_end=panel[1], points=tuple(points)),
                ),
            ),
        ),
    )


class TestQueryToGrid:
    def test_pipeline_matches_equivalent_trajectory(self):
        q = one_segment_query([(0, 0), (10, 0), (20, 0)])
        grid = query_to_grid(q, T=3)
        t = traj([(0, 0, 0, 8, 8), (5, 10, 0, 8, 8), (10, 20, 0, 8, 8)])
        v, m = resample(t, (0, 10), 3)
        expected = normalize(v[None], m[None])
        np.testing.assert_allclose(grid.values, expected.values, atol=1e-9)
        assert grid.mask.all()

    def test_perpendicular_two_object_shape(self):
        # Car segment vertical, person horizontal, aligned panel intervals:
        # masked-in car centers vary only in y, person only in x.
        q = VisualQuery(
            canvas_w=800,
            canvas_h=600,
            objects=(
                QueryObject(
                    object_id="car",
                    object_type="car",
                    nominal_w=10,
                    nominal_h=10,
                    segments=(QuerySegment(0.0, 10.0, ((50.0, 0.0), (50.0, 100.0))),),
                ),
                QueryObject(
                    object_id="person",
                    object_type="person",
                    nominal_w=5,
                    nominal_h=5,
                    segments=(QuerySegment(0.0, 10.0, ((0.0, 50.0), (100.0, 50.0))),),
                ),
            ),
        )
        grid = query_to_grid(q, T=8)
        assert grid.mask.all()
        car_x, car_y = grid.values[0, :, 0], grid.values[0, :, 1]
        per_x, per_y = grid.values[1, :, 0], grid.values[1, :, 1]
        assert np.ptp(car_x) < 1e-12 and np.ptp(car_y) > 0.5
        assert np.ptp(per_y) < 1e-12 and np.ptp(per_x) > 0.5

    def test_gap_holds_last_position(self):
        q = VisualQuery(
            canvas_w=800,
            canvas_h=600,
            objects=(
                QueryObject(
                    object_id="q0",
                    object_type="car",
                    nominal_w=4,
                    nominal_h=4,
                    segments=(
                        QuerySegment(0.0, 4.0, ((0.0, 0.0), (40.0, 0.0))),
                        QuerySegment(8.0, 12.0, ((40.0, 0.0), (40.0, 40.0))),
                    ),
                ),
            ),
        )
        grid = query_to_grid(q, T=13)
        assert grid.mask.all()
        # Ticks 4..8 sit at or inside the gap: position held at (40, 0) pre-normalization,
        # so normalized x stays constant there.
        gap = grid.values[0, 4:9, :2]
        assert np.ptp(gap[:, 0]) < 1e-12
        assert np.ptp(gap[:, 1]) < 1e-12

    def test_mask_false_outside_object_activity(self):
        q = VisualQuery(
            canvas_w=800,
            canvas_h=600,
            objects=(
                QueryObject(
                    object_id="a",
                    object_type="car",
                    nominal_w=4,
                    nominal_h=4,
                    segments=(QuerySegment(0.0, 10.0, ((0.0, 0.0), (10.0, 10.0))),),
                ),
                QueryObject(
                    object_id="b",
                    object_type="car",
                    nominal_w=4,
                    nominal_h=4,
                    segments=(QuerySegment(5.0, 10.0, ((20.0, 0.0), (30.0, 0.0))),),
                ),
            ),
        )
        grid = query_to_grid(q, T=11)
        assert grid.mask[0].all()
        assert not grid.mask[1, :5].any()
        assert grid.mask[1, 5:].all()

    def test_window_round_trip(self):
        # A query mechanically derived from a window with constant box sizes
        # featurizes identically to the window itself.
        rng = np.random.default_rng(7)
        n = 11
        centers = np.cumsum(rng.uniform(-5, 5, size=(n, 2)), axis=0) + 50
        boxes = tuple(
            BoundingBox(frame=f, cx=float(x), cy=float(y), w=6.0, h=6.0)
            for f, (x, y) in enumerate(centers)
        )
        tr = Trajectory(object_id="v1", object_type="car", boxes=boxes)
        window = ClipWindow(start_frame=0, end_frame=n - 1, tracks=(tr,))
        grid_w = window_to_grid(window, T=8)

        q = VisualQuery(
            canvas_w=800,
            canvas_h=600,
            objects=(
                QueryObject(
                    object_id="v1",
                    object_type="car",
                    nominal_w=6.0,
                    nominal_h=6.0,
                    segments=(
                        QuerySegment(0.0, float(n - 1), tuple(map(tuple, centers))),
                    ),
                ),
            ),
        )
        grid_q = query_to_grid(q, T=8)
        np.testing.assert_allclose(grid_q.values, grid_w.values, atol=1e-9)
        assert np.array_equal(grid_q.mask, grid_w.mask)

    def test_query_to_tracks_inverts_one_segment_query(self):
        q = one_segment_query([(0, 0), (10, 0), (20, 0)], panel=(0, 10))
        (track,) = query_to_tracks(q)
        assert track.first_frame == 0
        assert track.last_frame == 10
        assert track.boxes[5].cx == pytest.approx(10.0)


class TestTemporalIou:
    def test_identity(self):
        assert temporal_iou((0, 9), (0, 9)) == 1.0

    def test_disjoint(self):
        assert temporal_iou((0, 9), (10, 19)) == 0.0

    def test_partial_overlap(self):
        # Frames 5..9 shared (5 frames), union covers 0..14 (15 frames).
        assert temporal_iou((0, 9), (5, 14)) == pytest.approx(5 / 15)

    @given(
        st.tuples(st.integers(0, 50), st.integers(0, 50)),
        st.tuples(st.integers(0, 50), st.integers(0, 50)),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetric_and_bounded(self, a, b):
        a = (min(a), max(a))
        b = (min(b), max(b))
        iou_ab = temporal_iou(a, b)
        assert iou_ab == temporal_iou(b, a)
        assert 0.0 <= iou_ab <= 1.0
        if a == b:
            assert iou_ab == 1.0
        if a[1] < b[0] or b[1] < a[0]:
            assert iou_ab == 0.0


class TestDomainInvariants:
    def test_bounding_box_rejects_flat_boxes(self):
        with pytest.raises(GeometryError):
            BoundingBox(frame=0, cx=0, cy=0, w=0, h=1)
        with pytest.raises(GeometryError):
            BoundingBox(frame=-1, cx=0, cy=0, w=1, h=1)

    def test_trajectory_requires_increasing_frames(self):
        with pytest.raises(GeometryError, match="strictly increasing"):
            traj([(3, 0, 0, 1, 1), (3, 1, 1, 1, 1)])

    def test_clip_window_requires_two_boxes_per_track(self):
        t = traj([(0, 0, 0, 1, 1), (9, 1, 1, 1, 1)])
        with pytest.raises(GeometryError, match="need >= 2"):
            ClipWindow(start_frame=2, end_frame=5, tracks=(t,))

    def test_segments_must_not_overlap(self):
        with pytest.raises(GeometryError, match="overlap"):
            QueryObject(
                object_id="x",
                object_type="car",
                nominal_w=1,
                nominal_h=1,
                segments=(
                    QuerySegment(0.0, 5.0, ((0.0, 0.0), (1.0, 1.0))),
                    QuerySegment(4.0, 8.0, ((0.0, 0.0), (1.0, 1.0))),
                ),
            )
