"""Multi-scale detection orchestration around a pluggable pose detector.

The detector itself (a pose CNN in production, scripted callables in
tests) is abstracted behind DetectorContract; this module schedules the
coarse, refinement and sliding-window passes, merges their outputs and
derives skeleton boxes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from .court import CourtRegion, point_in_court
from .errors import EmptyKeypoints, InputFormatError
from .geometry import BBox, FrameDims, Point2, iou
from .imaging import FrameRaster, crop, resize_nearest

DUPLICATE_IOU = 0.5


class SourceStage(Enum):
    COARSE = "coarse"
    REFINED = "refined"
    SLIDING = "sliding"
    EXTERNAL = "external"


@dataclass(frozen=True)
class Keypoint:
    """One anatomical part: id in [0, 16], frame coordinates, confidence."""

    part_id: int
    position: Point2
    confidence: float

    def __post_init__(self):
        if not 0 <= self.part_id <= 16:
            raise ValueError(f"part_id {self.part_id} outside [0, 16]")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def skeleton_bbox(keypoints: list[Keypoint]) -> BBox:
    """Tight axis-aligned box over the keypoint positions, no padding."""
    if not keypoints:
        raise EmptyKeypoints("cannot build a box from zero keypoints")
    xs = [k.position.x for k in keypoints]
    ys = [k.position.y for k in keypoints]
    return BBox(min(xs), min(ys), max(xs), max(ys))


@dataclass(frozen=True)
class Detection:
    """A person hypothesis: keypoints plus their derived bounding box."""

    keypoints: tuple[Keypoint, ...]
    bbox: BBox
    source_stage: SourceStage

    def __post_init__(self):
        if not self.keypoints:
            raise ValueError("detection needs at least one keypoint")
        ids = [k.part_id for k in self.keypoints]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate part ids in detection: {sorted(ids)}")
        derived = skeleton_bbox(list(self.keypoints))
        if (
            abs(derived.x_min - self.bbox.x_min) > 1e-6
            or abs(derived.y_min - self.bbox.y_min) > 1e-6
            or abs(derived.x_max - self.bbox.x_max) > 1e-6
            or abs(derived.y_max - self.bbox.y_max) > 1e-6
        ):
            raise ValueError("bbox does not match the skeleton keypoints")

    @classmethod
    def from_keypoints(cls, keypoints: list[Keypoint], stage: SourceStage) -> "Detection":
        return cls(tuple(keypoints), skeleton_bbox(keypoints), stage)

    @property
    def mean_confidence(self) -> float:
        return sum(k.confidence for k in self.keypoints) / len(self.keypoints)

    def parts(self) -> dict[int, Keypoint]:
        return {k.part_id: k for k in self.keypoints}


class DetectorContract(Protocol):
    """Pose detector adapter.

    Called with the raster content of one query window, the window
    origin in frame coordinates and the window scale (frame pixels per
    window pixel is 1/scale). Returns detections already mapped to frame
    coordinates; returned keypoints must lie within the window's
    frame-coordinate footprint. The engine treats the detector as
    deterministic and never retries.
    """

    def __call__(
        self, window: FrameRaster, origin: Point2, scale: float
    ) -> list[Detection]: ...


@dataclass(frozen=True)
class ScalePlan:
    """Window geometry of the multi-scale strategy.

    model_w/model_h are the detector's native resolution; coarse_scale
    is the downscale ratio of the first pass (0.45 maps full HD onto
    twice the model width); overlap is the sliding-window overlap ratio.
    """

    model_w: int = 432
    model_h: int = 368
    coarse_scale: float = 0.45
    overlap: float = 0.5

    def __post_init__(self):
        if self.model_w <= 0 or self.model_h <= 0:
            raise ValueError("model dims must be positive")
        if not 0.0 < self.overlap < 1.0:
            raise ValueError("overlap must be in (0, 1)")
        if self.coarse_scale <= 0.0:
            raise ValueError("coarse_scale must be positive")

    @classmethod
    def for_frame(cls, dims: FrameDims, overlap: float = 0.5) -> "ScalePlan":
        """Width-anchored coarse scale: downscale to twice the model width."""
        return cls(coarse_scale=min(1.0, 2.0 * 432 / dims.w), overlap=overlap)

    @property
    def stride_x(self) -> int:
        return max(1, round(self.model_w * (1.0 - self.overlap)))

    @property
    def stride_y(self) -> int:
        return max(1, round(self.model_h * (1.0 - self.overlap)))


def _require_frame_fits(dims: FrameDims, plan: ScalePlan) -> None:
    if dims.w < plan.model_w or dims.h < plan.model_h:
        raise ValueError(
            f"frame {dims.w}x{dims.h} smaller than model window "
            f"{plan.model_w}x{plan.model_h}"
        )


def coarse_scale_dims(dims: FrameDims, plan: ScalePlan) -> FrameDims:
    return FrameDims(round(dims.w * plan.coarse_scale), round(dims.h * plan.coarse_scale))


def coarse_pass(
    frame: FrameRaster, detector: DetectorContract, plan: ScalePlan
) -> list[Detection]:
    """Single detector query on the frame downscaled by coarse_scale."""
    _require_frame_fits(frame.dims, plan)
    small = resize_nearest(frame, coarse_scale_dims(frame.dims, plan))
    return list(detector(small, Point2(0.0, 0.0), plan.coarse_scale))


def refine_window_origin(center: Point2, dims: FrameDims, plan: ScalePlan) -> tuple[int, int]:
    """Model-sized window origin centered on `center`, clamped into the frame."""
    ox = int(math.floor(center.x - plan.model_w / 2.0 + 0.5))
    oy = int(math.floor(center.y - plan.model_h / 2.0 + 0.5))
    ox = min(max(ox, 0), dims.w - plan.model_w)
    oy = min(max(oy, 0), dims.h - plan.model_h)
    return ox, oy


def refine_pass(
    frame: FrameRaster,
    coarse: list[Detection],
    detector: DetectorContract,
    plan: ScalePlan,
    dup_iou: float = DUPLICATE_IOU,
) -> list[Detection]:
    """Requery a full-resolution model window around each coarse detection."""
    dims = frame.dims
    if coarse:
        _require_frame_fits(dims, plan)
    found: list[Detection] = []
    for det in coarse:
        ox, oy = refine_window_origin(det.bbox.centroid, dims, plan)
        window = crop(frame, ox, oy, plan.model_w, plan.model_h)
        found.extend(detector(window, Point2(float(ox), float(oy)), 1.0))
    return dedup_detections(found, dup_iou)


def sliding_origins(dims: FrameDims, plan: ScalePlan) -> list[tuple[int, int]]:
    """Stride-and-flush grid of window origins covering the whole frame."""

    def axis(frame_len: int, model_len: int, stride: int) -> list[int]:
        out = [0]
        while out[-1] + stride + model_len <= frame_len:
            out.append(out[-1] + stride)
        if out[-1] + model_len < frame_len:
            out.append(frame_len - model_len)
        return out

    xs = axis(dims.w, plan.model_w, plan.stride_x)
    ys = axis(dims.h, plan.model_h, plan.stride_y)
    return [(x, y) for y in ys for x in xs]


def sliding_pass(
    frame: FrameRaster,
    detector: DetectorContract,
    plan: ScalePlan,
    dup_iou: float = DUPLICATE_IOU,
) -> list[Detection]:
    """Query every window of the overlapping full-resolution grid."""
    _require_frame_fits(frame.dims, plan)
    found: list[Detection] = []
    for ox, oy in sliding_origins(frame.dims, plan):
        window = crop(frame, ox, oy, plan.model_w, plan.model_h)
        found.extend(detector(window, Point2(float(ox), float(oy)), 1.0))
    return dedup_detections(found, dup_iou)


def dedup_detections(dets: list[Detection], dup_iou: float = DUPLICATE_IOU) -> list[Detection]:
    """Drop near-duplicates within one pass.

    Among detections whose boxes overlap at IoU >= dup_iou the one with
    more keypoints survives, ties broken by higher mean confidence, then
    by input order. Output keeps input order.
    """
    order = sorted(
        range(len(dets)),
        key=lambda i: (-len(dets[i].keypoints), -dets[i].mean_confidence, i),
    )
    kept: list[int] = []
    for i in order:
        if all(iou(dets[i].bbox, dets[j].bbox) < dup_iou for j in kept):
            kept.append(i)
    return [dets[i] for i in sorted(kept)]


def merge_detections(
    primary: list[Detection], extra: list[Detection], dup_iou: float = DUPLICATE_IOU
) -> list[Detection]:
    """Keep all of `primary`; add the extras not already found there.

    An extra duplicates a primary detection when their box IoU reaches
    dup_iou (threshold inclusive).
    """
    out = list(primary)
    for det in extra:
        if all(iou(det.bbox, p.bbox) < dup_iou for p in primary):
            out.append(det)
    return out


def detect_frame(
    frame: FrameRaster,
    detector: DetectorContract,
    plan: ScalePlan,
    dup_iou: float = DUPLICATE_IOU,
) -> list[Detection]:
    """Full pipeline: coarse pass, refinement, then sliding-window fill-in."""
    coarse = coarse_pass(frame, detector, plan)
    refined = refine_pass(frame, coarse, detector, plan, dup_iou)
    stage1 = merge_detections(refined, coarse, dup_iou)
    sliding = sliding_pass(frame, detector, plan, dup_iou)
    return merge_detections(stage1, sliding, dup_iou)


def filter_by_court(dets: list[Detection], region: CourtRegion) -> list[Detection]:
    """Keep detections whose box bottom-center lies on the court."""
    out = []
    for det in dets:
        anchor = Point2((det.bbox.x_min + det.bbox.x_max) / 2.0, det.bbox.y_max)
        if point_in_court(region, anchor):
            out.append(det)
    return out


# --- JSON Lines detection fixtures -------------------------------------------

def write_detections_jsonl(per_frame: dict[int, list[Detection]], path) -> None:
    """One JSON object per detection: frame, keypoints, stage."""
    with open(path, "w") as fh:
        for frame_idx in sorted(per_frame):
            for det in per_frame[frame_idx]:
                obj = {
                    "frame": frame_idx,
                    "keypoints": [
                        {"part": k.part_id, "x": k.position.x, "y": k.position.y, "c": k.confidence}
                        for k in det.keypoints
                    ],
                    "stage": det.source_stage.value,
                }
                fh.write(json.dumps(obj, sort_keys=True) + "\n")


def read_detections_jsonl(path) -> dict[int, list[Detection]]:
    per_frame: dict[int, list[Detection]] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise InputFormatError(path, f"invalid JSON: {exc}", line=lineno) from None
            try:
                frame_idx = int(obj["frame"])
            except (KeyError, TypeError, ValueError):
                raise InputFormatError(path, "missing integer field", line=lineno, field="frame")
            try:
                stage = SourceStage(obj.get("stage", "external"))
            except ValueError:
                raise InputFormatError(
                    path, f"unknown stage {obj.get('stage')!r}", line=lineno, field="stage"
                )
            kps = []
            for k in obj.get("keypoints", []):
                try:
                    kps.append(
                        Keypoint(int(k["part"]), Point2(float(k["x"]), float(k["y"])), float(k["c"]))
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise InputFormatError(
                        path, f"bad keypoint: {exc}", line=lineno, field="keypoints"
                    ) from None
            if not kps:
                raise InputFormatError(path, "detection without keypoints", line=lineno, field="keypoints")
            per_frame.setdefault(frame_idx, []).append(
                Detection.from_keypoints(kps, stage)
            )
    return per_frame
