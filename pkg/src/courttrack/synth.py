"""Synthetic tracking scenarios and brute-force oracles.

Generated sequences stand in for real annotated footage: targets are
solid-color rectangles on a flat background, the camera pans at a
constant rate, and the per-frame homographies cancel that pan exactly.
Ground truth covers every target in every frame; dropout and jitter
only degrade the detections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .detect import Detection, Keypoint, SourceStage
from .errors import TargetOutOfFrame, TooLarge
from .geometry import BBox, FrameDims, Homography, Point2
from .imaging import FrameRaster
from .metrics import GroundTruthBox
from .rng import SplitMix64
from .track import CostMatrix, FrameObservations

# Keypoint stencil: (part_id, relative x, relative y) inside the box. The
# hull of the stencil spans the whole box, so a detection's skeleton box
# equals the box it was planted in.
KEYPOINT_STENCIL = (
    (0, 0.5, 0.0),
    (5, 0.0, 0.25),
    (6, 1.0, 0.25),
    (11, 0.0, 1.0),
    (12, 1.0, 1.0),
)

BACKGROUND_COLOR = (96, 96, 96)
MIN_COLOR_DISTANCE = 60  # max channel difference required between target colors


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one synthetic sequence.

    motion is one (vx, vy) velocity per target in world pixels/frame
    (None places stationary targets); pan is the constant camera
    translation per frame. Dropout removes whole detections, jitter
    perturbs detection box corners; neither touches the ground truth.
    """

    n_targets: int = 10
    n_frames: int = 40
    dims: FrameDims = field(default_factory=lambda: FrameDims(640, 360))
    motion: tuple[tuple[float, float], ...] | None = None
    pan: tuple[float, float] = (0.0, 0.0)
    dropout_rate: float = 0.0
    jitter_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_targets < 1:
            raise ValueError("need at least one target")
        if self.n_frames < 2:
            raise ValueError("need at least two frames")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.jitter_sigma < 0.0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.motion is not None and len(self.motion) != self.n_targets:
            raise ValueError("motion needs one velocity per target")


@dataclass
class SyntheticSequence:
    spec: ScenarioSpec
    gt: list[GroundTruthBox]
    detections: dict[int, list[Detection]]
    homographies: list[Homography]
    frames: list[FrameRaster]

    def frame_observations(self) -> list[FrameObservations]:
        """Repackage for run_tracker."""
        return [
            FrameObservations(
                t, self.detections.get(t, []), self.homographies[t], self.frames[t]
            )
            for t in range(self.spec.n_frames)
        ]


def _target_colors(n: int, seed: int) -> list[tuple[int, int, int]]:
    """Distinct flat colors, pairwise (and vs background) separated by at
    least MIN_COLOR_DISTANCE in some channel."""
    rng = SplitMix64(seed, 0xC0108)
    colors: list[tuple[int, int, int]] = [BACKGROUND_COLOR]
    while len(colors) < n + 1:
        cand = (rng.randint(20, 235), rng.randint(20, 235), rng.randint(20, 235))
        if all(
            max(abs(cand[k] - c[k]) for k in range(3)) >= MIN_COLOR_DISTANCE for c in colors
        ):
            colors.append(cand)
    return colors[1:]


def _box_size(dims: FrameDims) -> tuple[float, float]:
    return (max(8.0, round(dims.w / 24.0)), max(16.0, round(dims.h / 6.0)))


def _start_positions(spec: ScenarioSpec, motion, box_w: float, box_h: float):
    """Grid placement of box origins, feasible for the whole sequence.

    The image-space drift of target i over the sequence is
    (v_i - pan) * t; the start position must keep the box inside the
    frame for every t.
    """
    rng = SplitMix64(spec.seed, 0x9051)
    t_last = spec.n_frames - 1
    n_cols = math.ceil(math.sqrt(spec.n_targets))
    n_rows = math.ceil(spec.n_targets / n_cols)
    starts = []
    for i in range(spec.n_targets):
        dvx = motion[i][0] - spec.pan[0]
        dvy = motion[i][1] - spec.pan[1]
        x_lo = max(0.0, -dvx * t_last)
        x_hi = spec.dims.w - box_w - max(0.0, dvx * t_last)
        y_lo = max(0.0, -dvy * t_last)
        y_hi = spec.dims.h - box_h - max(0.0, dvy * t_last)
        if x_lo > x_hi or y_lo > y_hi:
            raise TargetOutOfFrame(
                f"target {i} cannot stay in frame with drift ({dvx}, {dvy})/frame"
            )
        col = i % n_cols
        row = i // n_cols
        fx = (col + 0.5) / n_cols + rng.uniform(-0.08, 0.08)
        fy = (row + 0.5) / n_rows + rng.uniform(-0.08, 0.08)
        fx = min(max(fx, 0.0), 1.0)
        fy = min(max(fy, 0.0), 1.0)
        starts.append((x_lo + fx * (x_hi - x_lo), y_lo + fy * (y_hi - y_lo)))
    return starts


def _stencil_detection(box: BBox, stage: SourceStage) -> Detection:
    keypoints = [
        Keypoint(
            part_id,
            Point2(box.x_min + rx * box.width, box.y_min + ry * box.height),
            0.9,
        )
        for part_id, rx, ry in KEYPOINT_STENCIL
    ]
    return Detection.from_keypoints(keypoints, stage)


def generate(spec: ScenarioSpec) -> SyntheticSequence:
    """Deterministic scenario synthesis; same spec, same bytes."""
    motion = spec.motion if spec.motion is not None else ((0.0, 0.0),) * spec.n_targets
    box_w, box_h = _box_size(spec.dims)
    starts = _start_positions(spec, motion, box_w, box_h)
    colors = _target_colors(spec.n_targets, spec.seed)

    gt: list[GroundTruthBox] = []
    detections: dict[int, list[Detection]] = {}
    homographies: list[Homography] = []
    frames: list[FrameRaster] = []

    for t in range(spec.n_frames):
        pan_x, pan_y = spec.pan[0] * t, spec.pan[1] * t
        homographies.append(Homography.translation(pan_x, pan_y))
        raster = np.empty((spec.dims.h, spec.dims.w, 3), dtype=np.uint8)
        raster[:, :] = BACKGROUND_COLOR
        frame_dets: list[Detection] = []
        for i in range(spec.n_targets):
            x = starts[i][0] + motion[i][0] * t - pan_x
            y = starts[i][1] + motion[i][1] * t - pan_y
            box = BBox(x, y, x + box_w, y + box_h)
            if box.x_min < 0 or box.y_min < 0 or box.x_max > spec.dims.w or box.y_max > spec.dims.h:
                raise TargetOutOfFrame(f"target {i} leaves the frame at t={t}")
            gt.append(GroundTruthBox(t, i, box))

            x0, y0 = round(box.x_min), round(box.y_min)
            x1, y1 = round(box.x_max), round(box.y_max)
            raster[max(0, y0) : y1, max(0, x0) : x1] = colors[i]

            drop_rng = SplitMix64(spec.seed, 0xD809, t, i)
            if spec.dropout_rate > 0.0 and drop_rng.uniform() < spec.dropout_rate:
                continue
            det_box = box
            if spec.jitter_sigma > 0.0:
                jit = SplitMix64(spec.seed, 0x7177E8, t, i)
                xs = sorted(
                    (
                        box.x_min + jit.gauss(0.0, spec.jitter_sigma),
                        box.x_max + jit.gauss(0.0, spec.jitter_sigma),
                    )
                )
                ys = sorted(
                    (
                        box.y_min + jit.gauss(0.0, spec.jitter_sigma),
                        box.y_max + jit.gauss(0.0, spec.jitter_sigma),
                    )
                )
                det_box = BBox(xs[0], ys[0], xs[1], ys[1])
            frame_dets.append(_stencil_detection(det_box, SourceStage.EXTERNAL))
        detections[t] = frame_dets
        frames.append(FrameRaster(raster))

    return SyntheticSequence(spec, gt, detections, homographies, frames)


def degrade(seq: SyntheticSequence, extra_dropout: float, seed: int) -> SyntheticSequence:
    """Remove additional single-frame detections.

    A detection is removed only when the same target is detected in the
    adjacent frames (and the following frame is then protected), so no
    target ever misses two consecutive frames and a two-frame memory can
    always recover.
    """
    if not 0.0 <= extra_dropout < 1.0:
        raise ValueError("extra_dropout must lie in [0, 1)")
    if extra_dropout == 0.0:
        return SyntheticSequence(
            seq.spec,
            list(seq.gt),
            {t: list(dets) for t, dets in seq.detections.items()},
            list(seq.homographies),
            list(seq.frames),
        )

    spec = seq.spec
    # match detections back to targets through the ground-truth boxes
    gt_box = {(g.frame, g.id): g.bbox for g in seq.gt}
    present: dict[tuple[int, int], Detection] = {}
    for t, dets in seq.detections.items():
        for det in dets:
            target = _closest_target(det, t, spec.n_targets, gt_box)
            present[(t, target)] = det

    protected: set[tuple[int, int]] = set()
    for i in range(spec.n_targets):
        for t in range(spec.n_frames):
            key = (t, i)
            if key not in present or key in protected:
                continue
            before_ok = t == 0 or (t - 1, i) in present
            after_ok = t == spec.n_frames - 1 or (t + 1, i) in present
            if not (before_ok and after_ok):
                continue
            if SplitMix64(seed, 0xDE64ADE, t, i).uniform() < extra_dropout:
                del present[key]
                protected.add((t + 1, i))

    detections: dict[int, list[Detection]] = {t: [] for t in range(spec.n_frames)}
    for (t, i), det in sorted(present.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        detections[t].append(det)
    return SyntheticSequence(
        spec, list(seq.gt), detections, list(seq.homographies), list(seq.frames)
    )


def _closest_target(
    det: Detection, t: int, n_targets: int, gt_box: dict[tuple[int, int], BBox]
) -> int:
    cx, cy = det.bbox.centroid.x, det.bbox.centroid.y
    best, best_d = 0, float("inf")
    for i in range(n_targets):
        box = gt_box[(t, i)]
        d = math.hypot(box.centroid.x - cx, box.centroid.y - cy)
        if d < best_d:
            best, best_d = i, d
    return best


def brute_force_assignment(m: CostMatrix) -> tuple[list[tuple[int, int]], float]:
    """Exhaustive minimum over all injections of the smaller side.

    Oracle counterpart of solve_assignment; totals use compensated
    summation so ties are mathematical ties.
    """
    n_rows, n_cols = m.n_rows, m.n_cols
    if max(n_rows, n_cols) > 9:
        raise TooLarge("brute force limited to 9 rows/columns")
    if n_rows == 0 or n_cols == 0:
        return [], 0.0
    entries = m.entries
    best_pairs: list[tuple[int, int]] | None = None
    best_total = math.inf
    if n_rows <= n_cols:
        for perm in permutations(range(n_cols), n_rows):
            total = math.fsum(entries[i, perm[i]] for i in range(n_rows))
            if total < best_total:
                best_total = total
                best_pairs = [(i, perm[i]) for i in range(n_rows)]
    else:
        for perm in permutations(range(n_rows), n_cols):
            pairs = sorted((perm[j], j) for j in range(n_cols))
            total = math.fsum(entries[i, j] for i, j in pairs)
            if total < best_total:
                best_total = total
                best_pairs = pairs
    assert best_pairs is not None
    return best_pairs, best_total
