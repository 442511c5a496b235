import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubekit.errors import DegenerateTubeError, OutOfRangeError, ParameterError
from tubekit.geometry import (Box, TemporalSpan, Tube, box_iou, interp_tube,
                              iou_array, segment_iou, tube_iou)

finite_coord = st.floats(min_value=-2.0, max_value=3.0, allow_nan=False)
positive_size = st.floats(min_value=1e-3, max_value=2.0, allow_nan=False)


@st.composite
def boxes(draw):
    return Box(draw(finite_coord), draw(finite_coord),
               draw(positive_size), draw(positive_size))


def random_tube(rng, n_frames=10, label=0):
    frames = []
    for t in range(n_frames):
        frames.append((t, Box(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                              rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4))))
    return Tube(label, tuple(frames))


class TestBox:
    def test_rejects_nonpositive_size(self):
        with pytest.raises(ValueError):
            Box(0.5, 0.5, 0.0, 0.1)
        with pytest.raises(ValueError):
            Box(0.5, 0.5, 0.1, -0.2)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Box(math.nan, 0.5, 0.1, 0.1)
        with pytest.raises(ValueError):
            Box(0.5, math.inf, 0.1, 0.1)

    def test_corner_roundtrip(self):
        b = Box(0.5, 0.4, 0.2, 0.3)
        rb = Box.from_corners(b.x1, b.y1, b.x2, b.y2)
        for name in ("cx", "cy", "w", "h"):
            assert getattr(rb, name) == pytest.approx(getattr(b, name), abs=1e-12)

    def test_centers_may_leave_unit_square(self):
        Box(-0.5, 1.5, 0.2, 0.2)  # legal: interpolation overshoot


class TestBoxIou:
    def test_identity_is_exactly_one(self):
        for b in [Box(0.5, 0.5, 0.2, 0.2), Box(0.1, 0.9, 1.3, 0.04)]:
            assert box_iou(b, b) == 1.0

    def test_disjoint_is_zero(self):
        assert box_iou(Box(0.2, 0.2, 0.1, 0.1), Box(0.8, 0.8, 0.1, 0.1)) == 0.0

    def test_hand_computed_third(self):
        # inter 0.1 * 0.2 = 0.02, union 0.06
        a = Box(0.5, 0.5, 0.2, 0.2)
        b = Box(0.6, 0.5, 0.2, 0.2)
        assert box_iou(a, b) == pytest.approx(1 / 3, abs=1e-12)

    def test_monte_carlo_cross_check(self):
        # independent area estimate by point sampling over the bounding region
        a = Box(0.5, 0.5, 0.2, 0.2)
        b = Box(0.6, 0.5, 0.2, 0.2)
        rng = np.random.default_rng(0)
        pts = rng.uniform([0.3, 0.3], [0.8, 0.7], size=(200_000, 2))

        def inside(box, p):
            return ((box.x1 <= p[:, 0]) & (p[:, 0] <= box.x2)
                    & (box.y1 <= p[:, 1]) & (p[:, 1] <= box.y2))

        in_a, in_b = inside(a, pts), inside(b, pts)
        mc = (in_a & in_b).sum() / (in_a | in_b).sum()
        assert box_iou(a, b) == pytest.approx(mc, abs=0.01)

    @given(boxes(), boxes())
    def test_symmetric_and_bounded(self, a, b):
        iou = box_iou(a, b)
        assert iou == box_iou(b, a)
        assert 0.0 <= iou <= 1.0

    @given(boxes(), boxes(), st.floats(min_value=0.1, max_value=10))
    def test_scale_invariance(self, a, b, s):
        scaled_a = Box(a.cx * s, a.cy * s, a.w * s, a.h * s)
        scaled_b = Box(b.cx * s, b.cy * s, b.w * s, b.h * s)
        assert box_iou(scaled_a, scaled_b) == pytest.approx(box_iou(a, b), abs=1e-9)

    def test_array_path_matches_scalar_exactly(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a = Box(*rng.uniform(0.1, 0.9, 2), *rng.uniform(0.05, 0.5, 2))
            b = Box(*rng.uniform(0.1, 0.9, 2), *rng.uniform(0.05, 0.5, 2))
            arr = iou_array(np.array([a.astuple()]), np.array([b.astuple()]))
            assert arr[0] == box_iou(a, b)


class TestTube:
    def test_requires_strictly_increasing_timestamps(self):
        b = Box(0.5, 0.5, 0.2, 0.2)
        with pytest.raises(ValueError):
            Tube(0, ((0, b), (0, b)))
        with pytest.raises(ValueError):
            Tube(0, ((3, b), (1, b)))

    def test_requires_nonempty(self):
        with pytest.raises(ValueError):
            Tube(0, ())

    def test_box_near(self):
        b0, b1 = Box(0.2, 0.2, 0.1, 0.1), Box(0.8, 0.8, 0.1, 0.1)
        tube = Tube(0, ((0, b0), (10, b1)))
        assert tube.box_near(0) is b0
        assert tube.box_near(4) is b0
        assert tube.box_near(5) is b0  # equidistant: earlier wins
        assert tube.box_near(6) is b1
        assert tube.box_near(99) is b1


class TestTubeIou:
    def test_identical(self):
        rng = np.random.default_rng(2)
        t = random_tube(rng)
        assert tube_iou(t, t) == 1.0

    def test_disjoint_frame_ranges(self):
        b = Box(0.5, 0.5, 0.2, 0.2)
        a = Tube(0, ((0, b), (1, b)))
        c = Tube(0, ((5, b), (6, b)))
        assert tube_iou(a, c) == 0.0

    def test_per_frame_average(self):
        # per-frame IOUs 1.0, 0.5, 0.5, 0.0 -> mean 0.5
        h = 0.2
        base = Box(0.5, 0.5, 0.3, h)
        half = Box(0.6, 0.5, 0.3, h)       # offset w/3 -> IOU 0.5
        away = Box(0.95, 0.5, 0.3, h)      # disjoint in x? 0.95-0.15=0.8 > 0.65
        assert box_iou(base, half) == pytest.approx(0.5, abs=1e-12)
        assert box_iou(base, away) == 0.0
        t_a = Tube(0, tuple((i, base) for i in range(4)))
        t_b = Tube(0, ((0, base), (1, half), (2, half), (3, away)))
        assert tube_iou(t_a, t_b) == pytest.approx(0.5, abs=1e-12)

    def test_partial_overlap_counts_missing_frames_as_zero(self):
        b = Box(0.5, 0.5, 0.2, 0.2)
        a = Tube(0, tuple((i, b) for i in range(4)))
        c = Tube(0, tuple((i, b) for i in range(2, 6)))
        # union covers 6 frames, 2 shared with IOU 1
        assert tube_iou(a, c) == pytest.approx(2 / 6)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n_a = int(rng.integers(2, 50))
            n_b = int(rng.integers(2, 50))
            start_b = int(rng.integers(0, 20))
            t_a = random_tube(rng, n_a)
            t_b = Tube(0, tuple((start_b + i, bx)
                                for i, (_, bx) in enumerate(random_tube(rng, n_b).frames)))
            # brute force: explicit frame loop over the union range
            da, db = dict(t_a.frames), dict(t_b.frames)
            frames = sorted(set(da) | set(db))
            total = 0.0
            for f in frames:
                if f in da and f in db:
                    total += box_iou(da[f], db[f])
            expected = total / len(frames)
            assert tube_iou(t_a, t_b) == expected
            assert tube_iou(t_b, t_a) == expected


class TestSegmentIou:
    def test_static_tube_equal_anchor(self):
        b = Box(0.5, 0.5, 0.2, 0.2)
        tube = Tube(0, tuple((i, b) for i in range(8)))
        for k in (1, 3, 6, 20):
            assert segment_iou(b, tube, 0, k) == 1.0

    def test_k_one_is_single_box(self):
        rng = np.random.default_rng(4)
        tube = random_tube(rng, 6)
        anchor = Box(0.5, 0.5, 0.3, 0.3)
        for i in range(6):
            assert segment_iou(anchor, tube, i, 1) == box_iou(anchor, tube.boxes[i])

    def test_hand_average(self):
        # widths chosen so offsets give IOUs 0.8, 0.8, 0.6, 0.6, 0.4, 0.4
        anchor = Box(0.5, 0.5, 0.9, 0.4)

        def offset_box(iou):
            d = anchor.w * (1 - iou) / (1 + iou)
            return Box(0.5 + d, 0.5, 0.9, 0.4)

        ious = (0.8, 0.8, 0.6, 0.6, 0.4, 0.4)
        tube = Tube(0, tuple((i, offset_box(v)) for i, v in enumerate(ious)))
        for i, v in enumerate(ious):
            assert box_iou(anchor, tube.boxes[i]) == pytest.approx(v, abs=1e-12)
        assert segment_iou(anchor, tube, 0, 6) == pytest.approx(0.6, abs=1e-12)

    def test_full_length_equals_plain_average(self):
        rng = np.random.default_rng(5)
        tube = random_tube(rng, 9)
        anchor = Box(0.5, 0.5, 0.3, 0.3)
        mean = sum(box_iou(anchor, b) for b in tube.boxes) / len(tube)
        assert segment_iou(anchor, tube, 0, len(tube)) == pytest.approx(mean)

    def test_truncates_at_tube_end(self):
        rng = np.random.default_rng(6)
        tube = random_tube(rng, 5)
        anchor = Box(0.5, 0.5, 0.3, 0.3)
        assert segment_iou(anchor, tube, 3, 10) == pytest.approx(
            (box_iou(anchor, tube.boxes[3]) + box_iou(anchor, tube.boxes[4])) / 2)

    def test_parameter_errors(self):
        rng = np.random.default_rng(7)
        tube = random_tube(rng, 5)
        anchor = Box(0.5, 0.5, 0.3, 0.3)
        with pytest.raises(ParameterError):
            segment_iou(anchor, tube, 0, 0)
        with pytest.raises(ParameterError):
            segment_iou(anchor, tube, 5, 1)


class TestInterpTube:
    def test_passes_through_knots(self):
        rng = np.random.default_rng(8)
        knots = [(t / 4, Box(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7),
                             rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3)))
                 for t in range(5)]
        out = interp_tube(knots, [t for t, _ in knots])
        for (_, expect), got in zip(knots, out):
            for name in ("cx", "cy", "w", "h"):
                assert abs(getattr(got, name) - getattr(expect, name)) < 1e-12

    def test_two_knots_midpoint(self):
        a = Box(0.2, 0.2, 0.1, 0.4)
        b = Box(0.6, 0.4, 0.3, 0.2)
        mid = interp_tube([(0.0, a), (1.0, b)], [0.5])[0]
        assert mid.cx == pytest.approx(0.4, abs=1e-12)
        assert mid.cy == pytest.approx(0.3, abs=1e-12)
        assert mid.w == pytest.approx(0.2, abs=1e-12)
        assert mid.h == pytest.approx(0.3, abs=1e-12)

    def test_three_collinear_knots_reproduce_line(self):
        def line_box(t):
            return Box(0.2 + 0.4 * t, 0.3 + 0.2 * t, 0.1 + 0.1 * t, 0.2 + 0.05 * t)

        knots = [(t, line_box(t)) for t in (0.0, 0.5, 1.0)]
        queries = np.linspace(0, 1, 23)
        for t, got in zip(queries, interp_tube(knots, queries)):
            expect = line_box(t)
            for name in ("cx", "cy", "w", "h"):
                assert abs(getattr(got, name) - getattr(expect, name)) < 1e-9

    def test_out_of_range_query(self):
        a = Box(0.5, 0.5, 0.2, 0.2)
        with pytest.raises(OutOfRangeError):
            interp_tube([(0.0, a), (1.0, a)], [1.5])
        with pytest.raises(OutOfRangeError):
            interp_tube([(0.0, a), (1.0, a)], [-0.1])

    def test_single_knot_rejected(self):
        with pytest.raises(DegenerateTubeError):
            interp_tube([(0.0, Box(0.5, 0.5, 0.2, 0.2))], [0.0])

    def test_nonincreasing_knots_rejected(self):
        a = Box(0.5, 0.5, 0.2, 0.2)
        with pytest.raises(ParameterError):
            interp_tube([(0.0, a), (0.0, a)], [0.0])


class TestTemporalSpan:
    def test_orders_endpoints(self):
        with pytest.raises(ValueError):
            TemporalSpan(5, 5)
        span = TemporalSpan(2, 6)
        assert span.n_frames == 5
        assert list(span.frames()) == [2, 3, 4, 5, 6]
