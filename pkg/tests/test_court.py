import math
import random

import numpy as np
import pytest

from courttrack.errors import DegenerateCourt, InputFormatError, NoCandidates, NoSegments
from courttrack.court import (
    CourtRegion,
    HsvFilter,
    LineSegment,
    Orientation,
    classify_orientation,
    converge_boundaries_nba,
    point_in_court,
    read_segments_csv,
    select_boundary_european,
    vote_dominant_lines,
)
from courttrack.geometry import FrameDims, Line2, Point2
from courttrack.imaging import BinaryMask, FrameRaster

DIMS = FrameDims(1920, 1080)


def seg(x0, y0, x1, y1):
    return LineSegment(Point2(float(x0), float(y0)), Point2(float(x1), float(y1)))


def normal_angle_deg(line: Line2) -> float:
    return math.degrees(math.atan2(line.b, line.a)) % 180.0


def angle_diff_deg(a: float, b: float) -> float:
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


class TestVoteDominantLines:
    def test_collinear_segments_share_one_cell(self):
        segments = [seg(0, 100, 10, 100), seg(50, 100, 70, 100), seg(200, 100, 230, 100)]
        votes = vote_dominant_lines(segments, DIMS)
        assert len(votes) == 1
        top = votes[0]
        assert top.weight == pytest.approx(60.0, abs=1e-9)
        # recovered line is y = 100
        assert abs(top.line.a) < 1e-9
        assert abs(abs(top.line.b) - 1.0) < 1e-9
        assert abs(top.line.signed(Point2(500.0, 100.0))) < 1e-9

    def test_rank_order_follows_support(self):
        segments = [
            seg(0, 200, 25, 200),
            seg(0, 50, 100, 50),
            seg(400, 200, 415, 200),
        ]
        votes = vote_dominant_lines(segments, DIMS)
        assert votes[0].weight == pytest.approx(100.0)
        assert votes[1].weight == pytest.approx(40.0)
        assert abs(votes[0].line.signed(Point2(10.0, 50.0))) < 1e-9

    def test_planted_line_recovered_among_scatter(self):
        rng = random.Random(99)
        phi = math.radians(25.0)
        cx, cy = 900.0, 600.0

        def on_line(s):
            return (cx + s * math.cos(phi), cy + s * math.sin(phi))

        spans = [(-220, -120), (-100, -40), (-20, 60), (80, 160), (180, 260)]
        segments = [seg(*on_line(s0), *on_line(s1)) for s0, s1 in spans]
        assert sum(s.length for s in segments) == pytest.approx(400.0)
        for _ in range(50):
            x, y = rng.uniform(50, 1870), rng.uniform(50, 1030)
            ang = rng.uniform(0, math.pi)
            ln = rng.uniform(5, 20)
            segments.append(
                seg(x, y, x + ln * math.cos(ang), y + ln * math.sin(ang))
            )
        rng.shuffle(segments)

        votes = vote_dominant_lines(segments, DIMS)
        top = votes[0]
        assert top.weight == pytest.approx(400.0, abs=1e-6)
        true_line = Line2.from_points(Point2(*on_line(-220)), Point2(*on_line(260)))
        assert angle_diff_deg(normal_angle_deg(top.line), normal_angle_deg(true_line)) <= 0.5
        for s in (-220, 260):
            assert abs(top.line.signed(Point2(*on_line(s)))) <= 2.0

    def test_total_weight_equals_sum_of_lengths(self):
        rng = random.Random(4)
        segments = []
        for _ in range(60):
            x, y = rng.uniform(0, 1800), rng.uniform(0, 1000)
            segments.append(seg(x, y, x + rng.uniform(1, 60), y + rng.uniform(1, 60)))
        votes = vote_dominant_lines(segments, DIMS)
        assert sum(v.weight for v in votes) == pytest.approx(
            math.fsum(s.length for s in segments), rel=1e-12
        )

    def test_rank_invariant_to_input_order(self):
        rng = random.Random(17)
        segments = [seg(0, 100, 50, 100), seg(60, 100, 90, 100), seg(0, 0, 40, 30)]
        for _ in range(30):
            x, y = rng.uniform(0, 1800), rng.uniform(0, 1000)
            segments.append(seg(x, y, x + rng.uniform(3, 40), y + rng.uniform(3, 40)))
        votes_a = vote_dominant_lines(segments, DIMS)
        shuffled = segments[:]
        rng.shuffle(shuffled)
        votes_b = vote_dominant_lines(shuffled, DIMS)
        assert [v.weight for v in votes_a] == [v.weight for v in votes_b]
        assert [v.line.coeffs() for v in votes_a] == [v.line.coeffs() for v in votes_b]

    def test_empty_input_raises(self):
        with pytest.raises(NoSegments):
            vote_dominant_lines([], DIMS)

    def test_vertical_segments_share_one_cell(self):
        segments = [seg(300, 0, 300, 40), seg(300, 100, 300, 160)]
        votes = vote_dominant_lines(segments, DIMS)
        assert len(votes) == 1
        assert votes[0].weight == pytest.approx(100.0)


class TestClassifyOrientation:
    def test_mid_horizontal(self):
        assert classify_orientation(Line2.horizontal_at(540.0), DIMS) == Orientation.HORIZONTAL

    def test_left_top_crossing_is_vertical(self):
        line = Line2.from_points(Point2(0.0, 270.0), Point2(640.0, 0.0))
        assert classify_orientation(line, DIMS) == Orientation.VERTICAL

    def test_exactly_vertical_is_vertical(self):
        assert classify_orientation(Line2.vertical_at(960.0), DIMS) == Orientation.VERTICAL

    def test_line_outside_frame_is_neither(self):
        line = Line2.from_points(Point2(-50.0, -10.0), Point2(-10.0, -50.0))
        assert classify_orientation(line, DIMS) == Orientation.NEITHER

    def test_negating_coefficients_does_not_change_class(self):
        rng = random.Random(8)
        for _ in range(100):
            p0 = Point2(rng.uniform(-500, 2500), rng.uniform(-500, 1500))
            p1 = Point2(rng.uniform(-500, 2500), rng.uniform(-500, 1500))
            if math.hypot(p1.x - p0.x, p1.y - p0.y) < 1.0:
                continue
            line = Line2.from_points(p0, p1)
            assert classify_orientation(line, DIMS) == classify_orientation(line.negated(), DIMS)


GREEN = (40, 180, 60)
GRAY = (120, 120, 130)
GREEN_FILTER = HsvFilter(90.0, 150.0, 0.4, 1.0, 0.2, 1.0)


def two_band_frame(dims: FrameDims, transition_row: int) -> FrameRaster:
    arr = np.empty((dims.h, dims.w, 3), dtype=np.uint8)
    arr[:transition_row] = GREEN
    arr[transition_row:] = GRAY
    return FrameRaster(arr)


class TestSelectBoundaryEuropean:
    def test_planted_transition_wins(self):
        dims = FrameDims(100, 100)
        frame = two_band_frame(dims, 30)
        candidates = [Line2.horizontal_at(10.0), Line2.horizontal_at(30.0), Line2.horizontal_at(60.0)]
        best = select_boundary_european(candidates, frame, GREEN_FILTER, Orientation.HORIZONTAL)
        assert best is candidates[1]

    def test_uniform_frame_ties_to_first(self):
        dims = FrameDims(60, 60)
        frame = FrameRaster.filled(dims, GREEN)
        candidates = [Line2.horizontal_at(20.0), Line2.horizontal_at(40.0)]
        best = select_boundary_european(candidates, frame, GREEN_FILTER, Orientation.HORIZONTAL)
        assert best is candidates[0]

    def test_single_candidate_returned(self):
        dims = FrameDims(60, 60)
        frame = two_band_frame(dims, 25)
        only = Line2.horizontal_at(13.0)
        assert (
            select_boundary_european([only], frame, GREEN_FILTER, Orientation.HORIZONTAL) is only
        )

    def test_no_candidate_of_axis_raises(self):
        dims = FrameDims(60, 60)
        frame = two_band_frame(dims, 25)
        with pytest.raises(NoCandidates):
            select_boundary_european(
                [Line2.horizontal_at(10.0)], frame, GREEN_FILTER, Orientation.VERTICAL
            )

    def test_seeded_two_region_frames(self):
        # planted transition among decoys, response difference >= 0.2
        for seed in (1, 2, 3):
            rng = random.Random(seed)
            dims = FrameDims(80, 120)
            row = rng.randrange(30, 90)
            frame = two_band_frame(dims, row)
            decoys = [r for r in (15, 25, 95, 105) if abs(r - row) > 5]
            candidates = [Line2.horizontal_at(float(r)) for r in decoys]
            candidates.insert(rng.randrange(len(candidates)), Line2.horizontal_at(float(row)))
            best = select_boundary_european(
                candidates, frame, GREEN_FILTER, Orientation.HORIZONTAL
            )
            assert abs(-best.c / best.b - row) < 1e-9

    def test_wrapping_hue_interval(self):
        red_filter = HsvFilter(350.0, 10.0, 0.5, 1.0, 0.2, 1.0)
        dims = FrameDims(20, 20)
        arr = np.empty((20, 20, 3), dtype=np.uint8)
        arr[:10] = (255, 0, 8)  # hue ~358, inside the wrapped interval
        arr[10:] = (0, 255, 0)
        match = red_filter.match_array(FrameRaster(arr))
        assert match[:10].all()
        assert not match[10:].any()

    def test_vertical_axis_side_split(self):
        dims = FrameDims(100, 60)
        arr = np.empty((dims.h, dims.w, 3), dtype=np.uint8)
        arr[:, :40] = GREEN
        arr[:, 40:] = GRAY
        frame = FrameRaster(arr)
        candidates = [Line2.vertical_at(20.0), Line2.vertical_at(40.0), Line2.vertical_at(70.0)]
        best = select_boundary_european(candidates, frame, GREEN_FILTER, Orientation.VERTICAL)
        assert best is candidates[1]


def banded_mask(w: int, h: int, top_rows: int, bottom_start: int, sparse: float, seed: int):
    rng = np.random.default_rng(seed)
    bits = rng.random((h, w)) < sparse
    bits[:top_rows] = True
    bits[bottom_start:] = True
    return BinaryMask(bits)


class TestConvergeBoundariesNba:
    def test_planted_bands_recovered(self):
        mask = banded_mask(192, 1080, top_rows=200, bottom_start=900, sparse=0.05, seed=0)
        top, bottom = converge_boundaries_nba(mask, Line2.horizontal_at(0.0), step=2.0)
        assert abs(-top.c / top.b - 200.0) <= 4.0
        assert abs(-bottom.c / bottom.b - 900.0) <= 4.0

    def test_all_false_mask_is_degenerate(self):
        mask = BinaryMask(np.zeros((200, 64), dtype=bool))
        with pytest.raises(DegenerateCourt):
            converge_boundaries_nba(mask, Line2.horizontal_at(0.0), step=2.0)

    def test_single_band_bottom_runs_to_meeting(self):
        bits = np.zeros((400, 192), dtype=bool)
        bits[:100] = True
        mask = BinaryMask(bits)
        top, bottom = converge_boundaries_nba(mask, Line2.horizontal_at(0.0), step=2.0)
        rho_top = -top.c / top.b
        rho_bottom = -bottom.c / bottom.b
        assert abs(rho_top - 100.0) <= 4.0
        assert rho_bottom == pytest.approx(rho_top)

    def test_seeded_band_recovery(self):
        for seed in (11, 22, 33):
            rng = random.Random(seed)
            h = 600
            top_rows = rng.randrange(60, 150)
            bottom_start = rng.randrange(380, 520)
            mask = banded_mask(128, h, top_rows, bottom_start, sparse=0.04, seed=seed)
            top, bottom = converge_boundaries_nba(mask, Line2.horizontal_at(0.0), step=2.0)
            assert abs(-top.c / top.b - top_rows) <= 4.0
            assert abs(-bottom.c / bottom.b - bottom_start) <= 4.0

    def test_vertical_orientation_scans_columns(self):
        rng = np.random.default_rng(5)
        bits = rng.random((120, 400)) < 0.04
        bits[:, :50] = True
        bits[:, 340:] = True
        mask = BinaryMask(bits)
        left, right = converge_boundaries_nba(mask, Line2.vertical_at(0.0), step=2.0)
        assert abs(-left.c / left.a - 50.0) <= 4.0
        assert abs(-right.c / right.a - 340.0) <= 4.0

    def test_step_must_be_at_least_one(self):
        mask = BinaryMask(np.ones((10, 10), dtype=bool))
        with pytest.raises(ValueError):
            converge_boundaries_nba(mask, Line2.horizontal_at(0.0), step=0.5)


class TestCourtRegion:
    def test_membership_full_frame_band(self):
        region = CourtRegion.from_boundaries(
            Line2.horizontal_at(100.0), Line2.horizontal_at(900.0), None, None, DIMS
        )
        assert point_in_court(region, Point2(960.0, 540.0))
        assert not point_in_court(region, Point2(960.0, 50.0))
        assert point_in_court(region, Point2(960.0, 100.0))  # boundary is closed

    def test_membership_with_lateral_boundaries(self):
        region = CourtRegion.from_boundaries(
            Line2.horizontal_at(100.0),
            Line2.horizontal_at(900.0),
            Line2.vertical_at(200.0),
            Line2.vertical_at(1700.0),
            DIMS,
        )
        assert point_in_court(region, Point2(960.0, 500.0))
        assert not point_in_court(region, Point2(100.0, 500.0))
        assert not point_in_court(region, Point2(1800.0, 500.0))

    def test_empty_region_rejected(self):
        with pytest.raises(DegenerateCourt):
            CourtRegion.from_boundaries(
                Line2.horizontal_at(500.0), Line2.horizontal_at(500.0), None, None, DIMS
            )

    def test_misclassified_boundary_rejected(self):
        with pytest.raises(ValueError):
            CourtRegion(
                Line2.vertical_at(10.0),
                Line2.horizontal_at(900.0),
                None,
                None,
                DIMS,
            )


class TestSegmentsCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "segments.csv"
        path.write_text("0,100,10,100\n5.5,2.25,9,9\n")
        segments = read_segments_csv(path)
        assert len(segments) == 2
        assert segments[1].p0 == Point2(5.5, 2.25)

    def test_bad_field_reports_location(self, tmp_path):
        path = tmp_path / "segments.csv"
        path.write_text("0,100,10,100\n1,2,zzz,4\n")
        with pytest.raises(InputFormatError) as err:
            read_segments_csv(path)
        assert "2" in str(err.value)
        assert "x1" in str(err.value)

    def test_wrong_arity_rejected(self, tmp_path):
        path = tmp_path / "segments.csv"
        path.write_text("1,2,3\n")
        with pytest.raises(InputFormatError):
            read_segments_csv(path)
