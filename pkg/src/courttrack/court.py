"""Court-region estimation from line segments, color filters and people-masks.

The segment detector and the people segmentation are upstream inputs:
segments arrive as CSV rows "x0,y0,x1,y1" and masks as PGM files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
import numpy as np

from .errors import DegenerateCourt, InputFormatError, NoCandidates, NoSegments
from .geometry import FrameDims, Line2, Point2
from .imaging import BinaryMask, FrameRaster, frame_to_hsv

THETA_BIN_DEG = 1.0
RHO_BIN_PX = 3.0
DEFAULT_STEP_PX = 2.0
DEFAULT_DROP_TOL = 0.005
DEFAULT_CANDIDATES = 10

_EDGE_TOL = 1e-9


class Orientation(Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    NEITHER = "neither"


@dataclass(frozen=True)
class LineSegment:
    p0: Point2
    p1: Point2

    def __post_init__(self):
        if self.length <= 0.0:
            raise ValueError("segment endpoints coincide")

    @property
    def length(self) -> float:
        return math.hypot(self.p1.x - self.p0.x, self.p1.y - self.p0.y)

    @property
    def midpoint(self) -> Point2:
        return Point2((self.p0.x + self.p1.x) / 2.0, (self.p0.y + self.p1.y) / 2.0)


@dataclass(frozen=True)
class LineVote:
    line: Line2
    weight: float

    def __post_init__(self):
        if self.weight <= 0.0:
            raise ValueError("vote weight must be positive")


@dataclass(frozen=True)
class HsvFilter:
    """HSV acceptance box; h_lo > h_hi means the hue interval wraps."""

    h_lo: float
    h_hi: float
    s_lo: float = 0.0
    s_hi: float = 1.0
    v_lo: float = 0.0
    v_hi: float = 1.0

    def __post_init__(self):
        if self.s_lo > self.s_hi or self.v_lo > self.v_hi:
            raise ValueError("saturation/value bounds must satisfy lo <= hi")

    def match_array(self, frame: FrameRaster) -> np.ndarray:
        h, s, v = frame_to_hsv(frame)
        if self.h_lo <= self.h_hi:
            hue_ok = (h >= self.h_lo) & (h <= self.h_hi)
        else:
            hue_ok = (h >= self.h_lo) | (h <= self.h_hi)
        return hue_ok & (s >= self.s_lo) & (s <= self.s_hi) & (v >= self.v_lo) & (v <= self.v_hi)


# --- dominant-line voting --------------------------------------------------

def _canonical_cell(line: Line2) -> tuple[int, int]:
    """Accumulator cell of a line: 1-degree angle bins, 3-px offset bins.

    The normal angle is folded into a half-turn with bin centers on
    integer degrees, so nearly identical lines never split across the
    0/180 seam regardless of orientation.
    """
    a, b, c = line.a, line.b, line.c
    theta = math.degrees(math.atan2(b, a))
    if theta < 0.0:
        theta += 180.0
        a, b, c = -a, -b, -c
    if theta >= 180.0 - THETA_BIN_DEG / 2.0:
        theta -= 180.0
        a, b, c = -a, -b, -c
    t_idx = int(math.floor((theta + THETA_BIN_DEG / 2.0) / THETA_BIN_DEG))
    r_idx = int(math.floor(-c / RHO_BIN_PX + 0.5))
    return t_idx, r_idx


def _fit_cell_line(segments: list[LineSegment]) -> Line2:
    """Length-weighted orthogonal least-squares line through the segments.

    Each segment contributes its midpoint plus the second moment of a
    uniform mass along its own extent, so collinear segments recover
    their common line exactly.
    """
    weights = [s.length for s in segments]
    total = math.fsum(weights)
    mx = math.fsum(w * s.midpoint.x for w, s in zip(weights, segments)) / total
    my = math.fsum(w * s.midpoint.y for w, s in zip(weights, segments)) / total

    sxx = sxy = syy = 0.0
    for w, s in zip(weights, segments):
        ux = (s.p1.x - s.p0.x) / s.length
        uy = (s.p1.y - s.p0.y) / s.length
        dx = s.midpoint.x - mx
        dy = s.midpoint.y - my
        along = w * w * w / 12.0  # integral of t^2 over the segment, times weight density
        sxx += w * dx * dx + along * ux * ux
        sxy += w * dx * dy + along * ux * uy
        syy += w * dy * dy + along * uy * uy

    phi = 0.5 * math.atan2(2.0 * sxy, sxx - syy)
    a, b = -math.sin(phi), math.cos(phi)
    return Line2(a, b, -(a * mx + b * my))


def vote_dominant_lines(segments: list[LineSegment], dims: FrameDims) -> list[LineVote]:
    """Rank candidate lines by the total length of their supporting segments.

    Each segment votes once, into the accumulator cell of its own
    supporting line; the returned line of a cell is the weighted
    least-squares fit of that cell's segments.
    """
    if not segments:
        raise NoSegments("dominant-line voting needs at least one segment")
    cells: dict[tuple[int, int], list[LineSegment]] = {}
    for seg in segments:
        cell = _canonical_cell(Line2.from_points(seg.p0, seg.p1))
        cells.setdefault(cell, []).append(seg)

    votes: list[tuple[tuple[int, int], LineVote]] = []
    for cell, segs in cells.items():
        segs = sorted(segs, key=lambda s: (s.p0.x, s.p0.y, s.p1.x, s.p1.y))
        weight = math.fsum(s.length for s in segs)
        votes.append((cell, LineVote(_fit_cell_line(segs), weight)))

    votes.sort(key=lambda cv: (-cv[1].weight, cv[0]))
    return [v for _, v in votes]


# --- orientation classification --------------------------------------------

def _side_crossings(line: Line2, dims: FrameDims) -> tuple[bool, bool, bool, bool]:
    """Whether the line crosses the (left, right, top, bottom) frame sides."""
    a, b, c = line.a, line.b, line.c
    w, h = float(dims.w), float(dims.h)
    if abs(b) > _EDGE_TOL:
        y_left = -c / b
        y_right = -(a * w + c) / b
        left = -_EDGE_TOL <= y_left <= h + _EDGE_TOL
        right = -_EDGE_TOL <= y_right <= h + _EDGE_TOL
    else:
        x = -c / a
        left = abs(x) <= _EDGE_TOL
        right = abs(x - w) <= _EDGE_TOL
    if abs(a) > _EDGE_TOL:
        x_top = -c / a
        x_bottom = -(b * h + c) / a
        top = -_EDGE_TOL <= x_top <= w + _EDGE_TOL
        bottom = -_EDGE_TOL <= x_bottom <= w + _EDGE_TOL
    else:
        y = -c / b
        top = abs(y) <= _EDGE_TOL
        bottom = abs(y - h) <= _EDGE_TOL
    return left, right, top, bottom


def classify_orientation(line: Line2, dims: FrameDims) -> Orientation:
    """Horizontal lines leave through both lateral frame sides; vertical
    ones pair one of top/bottom with one of left/right (an exactly
    vertical line, crossing top and bottom, counts as vertical)."""
    left, right, top, bottom = _side_crossings(line, dims)
    if left and right:
        return Orientation.HORIZONTAL
    if top and bottom:
        return Orientation.VERTICAL
    if (top != bottom) and (left != right):
        return Orientation.VERTICAL
    return Orientation.NEITHER


# --- boundary selection: European HSV variant -------------------------------

def select_boundary_european(
    candidates: list[Line2],
    frame: FrameRaster,
    hsv_filter: HsvFilter,
    axis: Orientation,
) -> Line2:
    """Pick the candidate with the largest filter-response contrast.

    For each candidate of the requested axis, the fraction of
    filter-matching pixels is computed on each side half-plane; the
    candidate maximizing the absolute difference wins, first in input
    order on ties.
    """
    dims = frame.dims
    axis_cands = [c for c in candidates if classify_orientation(c, dims) == axis]
    if not axis_cands:
        raise NoCandidates(f"no candidate line of axis {axis.value}")

    match = hsv_filter.match_array(frame)
    xs = np.arange(dims.w, dtype=np.float64)
    ys = np.arange(dims.h, dtype=np.float64)

    best: Line2 | None = None
    best_contrast = -1.0
    for cand in axis_cands:
        signed = cand.a * xs[None, :] + cand.b * ys[:, None] + cand.c
        side = signed >= 0.0
        n_side = int(side.sum())
        n_other = side.size - n_side
        frac_side = float(match[side].sum()) / n_side if n_side else 0.0
        frac_other = float(match[~side].sum()) / n_other if n_other else 0.0
        contrast = abs(frac_side - frac_other)
        if contrast > best_contrast:
            best_contrast = contrast
            best = cand
    assert best is not None
    return best


# --- boundary convergence: NBA people-mask variant ---------------------------

def converge_boundaries_nba(
    mask: BinaryMask,
    orientation_line: Line2,
    step: float = DEFAULT_STEP_PX,
    drop_tol: float = DEFAULT_DROP_TOL,
) -> tuple[Line2, Line2]:
    """Move two parallel boundary candidates inward until each percentage drops.

    Both lines share the orientation of `orientation_line` and start at
    the extreme ends of the mask. Each iteration moves the unfixed lines
    one step inward and evaluates (a) the people fraction beyond the top
    line, (b) the people fraction beyond the bottom line, and (c) the
    non-people fraction between them. A line whose own fraction drops by
    more than `drop_tol` against the previous iteration is fixed at its
    previous position. A fraction that starts at zero cannot fix its line
    until it first becomes positive; if the lines meet while neither is
    fixed the court is degenerate.
    """
    if step < 1.0:
        raise ValueError("step must be >= 1 pixel")
    a, b = orientation_line.a, orientation_line.b
    if b < -_EDGE_TOL or (abs(b) <= _EDGE_TOL and a < 0.0):
        a, b = -a, -b

    bits = mask.bits
    h, w = bits.shape
    proj = (a * np.arange(w, dtype=np.float64))[None, :] + (
        b * np.arange(h, dtype=np.float64)
    )[:, None]
    order = np.argsort(proj.reshape(-1), kind="stable")
    proj_sorted = proj.reshape(-1)[order]
    people_prefix = np.concatenate(([0], np.cumsum(bits.reshape(-1)[order])))
    n_pixels = proj_sorted.size
    total_people = int(people_prefix[-1])

    def frac_above(rho: float) -> float:
        k = int(np.searchsorted(proj_sorted, rho, side="left"))
        return float(people_prefix[k]) / k if k > 0 else 0.0

    def frac_below(rho: float) -> float:
        k = int(np.searchsorted(proj_sorted, rho, side="right"))
        count = n_pixels - k
        return float(total_people - people_prefix[k]) / count if count > 0 else 0.0

    def frac_clear_between(rho_lo: float, rho_hi: float) -> float:
        k_lo = int(np.searchsorted(proj_sorted, rho_lo, side="left"))
        k_hi = int(np.searchsorted(proj_sorted, rho_hi, side="right"))
        count = k_hi - k_lo
        if count <= 0:
            return 0.0
        return 1.0 - float(people_prefix[k_hi] - people_prefix[k_lo]) / count

    rho_top = float(proj_sorted[0])
    rho_bottom = float(proj_sorted[-1])
    prev_top = frac_above(rho_top)
    prev_bottom = frac_below(rho_bottom)
    seen_top = prev_top > 0.0
    seen_bottom = prev_bottom > 0.0
    fixed_top = fixed_bottom = False

    while not (fixed_top and fixed_bottom):
        if not fixed_top:
            rho_top += step
        if not fixed_bottom:
            rho_bottom -= step
        if rho_top > rho_bottom:
            if not fixed_top and not fixed_bottom:
                raise DegenerateCourt("boundary candidates met before any fraction drop")
            # the still-moving line stops where it meets the fixed one
            if fixed_top:
                rho_bottom = rho_top
                fixed_bottom = True
            else:
                rho_top = rho_bottom
                fixed_top = True
            break
        pct_top = frac_above(rho_top)
        pct_bottom = frac_below(rho_bottom)
        frac_clear_between(rho_top, rho_bottom)  # term (c) of the product objective
        if not fixed_top:
            if seen_top and pct_top < prev_top - drop_tol:
                rho_top -= step
                fixed_top = True
            else:
                prev_top = pct_top
                seen_top = seen_top or pct_top > 0.0
        if not fixed_bottom:
            if seen_bottom and pct_bottom < prev_bottom - drop_tol:
                rho_bottom += step
                fixed_bottom = True
            else:
                prev_bottom = pct_bottom
                seen_bottom = seen_bottom or pct_bottom > 0.0

    return Line2(a, b, -rho_top), Line2(a, b, -rho_bottom)


# --- court region ------------------------------------------------------------

def _closest_point_on_line(line: Line2, p: Point2) -> Point2:
    d = line.signed(p)
    return Point2(p.x - d * line.a, p.y - d * line.b)


def _orient_towards(line: Line2, witness: Point2) -> Line2:
    return line if line.signed(witness) >= 0.0 else line.negated()


def _orient_facing(line: Line2, other: Line2, center: Point2) -> Line2:
    """Orient `line` toward its paired boundary; coincident pairs have no
    interior between them and are rejected."""
    witness = _closest_point_on_line(other, center)
    d = line.signed(witness)
    if abs(d) <= _EDGE_TOL:
        raise DegenerateCourt("paired court boundaries coincide")
    return line if d > 0.0 else line.negated()


def _clip_halfplane(poly: list[Point2], line: Line2) -> list[Point2]:
    out: list[Point2] = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        d_cur, d_nxt = line.signed(cur), line.signed(nxt)
        if d_cur >= 0.0:
            out.append(cur)
        if (d_cur >= 0.0) != (d_nxt >= 0.0):
            t = d_cur / (d_cur - d_nxt)
            out.append(Point2(cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)))
    return out


def _polygon_area(poly: list[Point2]) -> float:
    if len(poly) < 3:
        return 0.0
    s = 0.0
    for i in range(len(poly)):
        p, q = poly[i], poly[(i + 1) % len(poly)]
        s += p.x * q.y - q.x * p.y
    return abs(s) / 2.0


@dataclass(frozen=True)
class CourtRegion:
    """Court half-plane intersection; stored lines point inward, so a
    point is on court iff every signed distance is >= 0."""

    top: Line2
    bottom: Line2
    left: Line2 | None
    right: Line2 | None
    dims: FrameDims

    def __post_init__(self):
        if classify_orientation(self.top, self.dims) != Orientation.HORIZONTAL:
            raise ValueError("top boundary must classify as horizontal")
        if classify_orientation(self.bottom, self.dims) != Orientation.HORIZONTAL:
            raise ValueError("bottom boundary must classify as horizontal")
        for side in (self.left, self.right):
            if side is not None and classify_orientation(side, self.dims) != Orientation.VERTICAL:
                raise ValueError("lateral boundary must classify as vertical")
        if _polygon_area(self._clip_frame()) <= 1e-9:
            raise DegenerateCourt("court boundaries enclose an empty region")

    def boundaries(self) -> list[Line2]:
        return [l for l in (self.top, self.bottom, self.left, self.right) if l is not None]

    def _clip_frame(self) -> list[Point2]:
        w, h = float(self.dims.w), float(self.dims.h)
        poly = [Point2(0.0, 0.0), Point2(w, 0.0), Point2(w, h), Point2(0.0, h)]
        for line in self.boundaries():
            poly = _clip_halfplane(poly, line)
            if not poly:
                return []
        return poly

    @classmethod
    def from_boundaries(
        cls,
        top: Line2,
        bottom: Line2,
        left: Line2 | None,
        right: Line2 | None,
        dims: FrameDims,
    ) -> "CourtRegion":
        """Build a region, orienting each boundary toward the court side."""
        center = Point2(dims.w / 2.0, dims.h / 2.0)
        top_o = _orient_facing(top, bottom, center)
        bottom_o = _orient_facing(bottom, top, center)
        left_o = right_o = None
        if left is not None:
            left_o = (
                _orient_facing(left, right, center)
                if right is not None
                else _orient_towards(left, center)
            )
        if right is not None:
            right_o = (
                _orient_facing(right, left, center)
                if left is not None
                else _orient_towards(right, center)
            )
        return cls(top_o, bottom_o, left_o, right_o, dims)


def point_in_court(region: CourtRegion, p: Point2) -> bool:
    """Closed-region membership: boundary points count as inside."""
    return all(line.signed(p) >= -_EDGE_TOL for line in region.boundaries())


# --- segment ingestion --------------------------------------------------------

def read_segments_csv(path) -> list[LineSegment]:
    """Read segments from CSV rows "x0,y0,x1,y1" (no header)."""
    segments: list[LineSegment] = []
    fields = ("x0", "y0", "x1", "y1")
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise InputFormatError(path, f"expected 4 values, got {len(row)}", line=lineno)
            values = []
            for name, cell in zip(fields, row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise InputFormatError(
                        path, f"not a number: {cell!r}", line=lineno, field=name
                    ) from None
            try:
                segments.append(
                    LineSegment(Point2(values[0], values[1]), Point2(values[2], values[3]))
                )
            except ValueError as exc:
                raise InputFormatError(path, str(exc), line=lineno) from None
    return segments
