import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vecstyle.errors import DimensionError
from vecstyle.scene import (
    Paint,
    ParamGroups,
    Scene,
    Shape,
    Subpath,
    apply_params,
    extract_params,
    param_layout,
)

from conftest import make_blob_scene


def square_subpath(closed=True):
    pts = [
        [0.0, 0.0], [3.0, 0.0], [7.0, 0.0],
        [10.0, 0.0], [10.0, 3.0], [10.0, 7.0],
        [10.0, 10.0], [7.0, 10.0], [3.0, 10.0],
        [0.0, 10.0], [0.0, 7.0], [0.0, 3.0],
    ]
    if not closed:
        pts.append([0.0, 0.0])
    return Subpath(points=np.array(pts), closed=closed)


class TestSubpath:
    def test_point_count_rules(self):
        with pytest.raises(DimensionError):
            Subpath(points=np.zeros((5, 2)), closed=True)  # not 3k
        with pytest.raises(DimensionError):
            Subpath(points=np.zeros((6, 2)), closed=False)  # not 3k+1
        with pytest.raises(DimensionError):
            Subpath(points=np.zeros((0, 2)), closed=True)

    def test_points_read_only(self):
        sub = square_subpath()
        with pytest.raises(ValueError):
            sub.points[0, 0] = 99.0

    def test_segments_closed_wraps(self):
        sub = square_subpath(closed=True)
        segs = list(sub.segments())
        assert len(segs) == 4
        assert np.array_equal(segs[-1][3], sub.points[0])

    def test_segments_open(self):
        sub = square_subpath(closed=False)
        segs = list(sub.segments())
        assert len(segs) == 4
        assert np.array_equal(segs[-1][3], sub.points[-1])


class TestPaint:
    def test_solid_channels(self):
        paint = Paint.solid(0.2, 0.4, 0.6, 0.8)
        assert paint.n_color_channels == 4
        assert np.allclose(paint.color_vector(), [0.2, 0.4, 0.6, 0.8])

    def test_gradient_channels(self):
        paint = Paint.linear_gradient(
            stop_offsets=[0.0, 0.5, 1.0],
            stop_colors=[[1, 0, 0, 1], [0, 1, 0, 1], [0, 0, 1, 0.5]],
            start=(0.0, 0.0),
            end=(10.0, 0.0),
        )
        assert paint.n_color_channels == 12
        round_trip = paint.with_color_vector(paint.color_vector())
        assert np.array_equal(round_trip.stop_colors, paint.stop_colors)

    def test_none_paint(self):
        assert Paint.none().n_color_channels == 0

    def test_with_color_vector_rejects_out_of_range(self):
        # range enforcement lives in the constructor; apply_params clamps first
        paint = Paint.solid(0.5, 0.5, 0.5, 1.0)
        with pytest.raises(DimensionError):
            paint.with_color_vector(np.array([1.4, -0.2, 0.3, 0.9]))
        ok = paint.with_color_vector(np.array([0.9, 0.0, 0.3, 1.0]))
        assert np.allclose(ok.rgba, [0.9, 0.0, 0.3, 1.0])


class TestParamRoundTrip:
    def test_extract_apply_identity(self):
        scene = make_blob_scene(seed=3, n_shapes=4)
        groups = extract_params(scene)
        rebuilt = apply_params(scene, groups)
        assert rebuilt.counts() == scene.counts()
        again = extract_params(rebuilt)
        assert np.array_equal(groups.points, again.points)
        assert np.array_equal(groups.colors, again.colors)
        assert np.array_equal(groups.widths, again.widths)

    def test_layout_matches_group_sizes(self):
        scene = make_blob_scene(seed=5, n_shapes=3)
        groups = extract_params(scene)
        layout = param_layout(scene)
        assert layout.n_points == groups.points.shape[0]
        assert layout.n_colors == groups.colors.shape[0]
        assert layout.n_widths == groups.widths.shape[0] == 3

    def test_apply_clamps_colors_and_widths(self):
        scene = make_blob_scene(seed=1, n_shapes=2)
        groups = extract_params(scene)
        groups.colors[:] = 7.0
        groups.widths[:] = -3.0
        out = apply_params(scene, groups)
        new = extract_params(out)
        assert np.all(new.colors == 1.0)
        assert np.all(new.widths == 0.0)

    def test_apply_rejects_wrong_sizes(self):
        scene = make_blob_scene(seed=1, n_shapes=2)
        groups = extract_params(scene)
        bad = ParamGroups(
            points=groups.points[:-2], colors=groups.colors, widths=groups.widths
        )
        with pytest.raises(DimensionError):
            apply_params(scene, bad)

    @given(seed=st.integers(0, 50), n_shapes=st.integers(1, 5))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_property(self, seed, n_shapes):
        scene = make_blob_scene(seed=seed, n_shapes=n_shapes)
        groups = extract_params(scene)
        rng = np.random.default_rng(seed + 1)
        shifted = ParamGroups(
            points=groups.points + rng.normal(0, 2, groups.points.shape),
            colors=np.clip(groups.colors + rng.normal(0, 0.1, groups.colors.shape), 0, 1),
            widths=np.maximum(groups.widths + rng.normal(0, 0.5, groups.widths.shape), 0),
        )
        out = apply_params(scene, shifted)
        assert out.counts() == scene.counts()
        back = extract_params(out)
        assert np.array_equal(back.points, shifted.points)
        assert np.array_equal(back.colors, shifted.colors)
        assert np.array_equal(back.widths, shifted.widths)


class TestSceneValidation:
    def test_negative_stroke_width_rejected(self):
        with pytest.raises(DimensionError):
            Shape(
                subpaths=(square_subpath(),),
                fill=Paint.solid(0, 0, 0, 1),
                stroke=Paint.none(),
                stroke_width=-1.0,
            )

    def test_counts(self):
        scene = make_blob_scene(seed=2, n_shapes=3)
        n_shapes, n_subpaths, n_points = scene.counts()
        assert n_shapes == 3 and n_subpaths == 3
        assert n_points == sum(
            sp.points.shape[0] for sh in scene.shapes for sp in sh.subpaths
        )
