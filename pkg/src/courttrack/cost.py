"""Three-term similarity cost between observed boxes.

The combined cost is alpha * distance + beta * overlap + gamma * content,
computed between two observations of (detection, stabilizing homography,
frame raster). All three terms are dissimilarities in [0, 1] for
in-frame stabilized centroids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .detect import Detection
from .errors import EmptyOverlap
from .geometry import (
    FrameDims,
    Homography,
    iou,
    normalized_centroid_distance,
    transform_bbox,
)
from .imaging import FrameRaster, PatchWindow, patch_mean_abs_diff

DEFAULT_ALPHA = 0.65
DEFAULT_BETA = 0.05


@dataclass(frozen=True)
class CostWeights:
    """Term weights (alpha, beta, gamma); gamma defaults to 1 - alpha - beta."""

    alpha: float
    beta: float
    gamma: float = float("nan")

    def __post_init__(self):
        if math.isnan(self.gamma):
            object.__setattr__(self, "gamma", 1.0 - (self.alpha + self.beta))
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")
        if self.gamma < -1e-12:
            raise ValueError("gamma = 1 - (alpha + beta) must be >= 0")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")


def default_weights() -> CostWeights:
    return CostWeights(DEFAULT_ALPHA, DEFAULT_BETA)


@dataclass(frozen=True)
class ObservedBox:
    """One detection together with its frame's stabilization and pixels."""

    detection: Detection
    homography: Homography
    frame: FrameRaster = field(repr=False)
    t: int = 0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("frame index must be >= 0")


def cost_distance(a: ObservedBox, b: ObservedBox, dims: FrameDims) -> float:
    """Stabilized centroid distance, normalized by the frame diagonal."""
    return normalized_centroid_distance(
        a.homography, b.homography, a.detection.bbox, b.detection.bbox, dims
    )


def cost_iou(a: ObservedBox, b: ObservedBox) -> float:
    """One minus the overlap of the stabilized boxes, so 0 is a perfect match."""
    box_a = transform_bbox(a.homography, a.detection.bbox)
    box_b = transform_bbox(b.homography, b.detection.bbox)
    return 1.0 - iou(box_a, box_b)


def cost_content(a: ObservedBox, b: ObservedBox, win: PatchWindow = PatchWindow()) -> float:
    """Mean patch difference over the keypoint parts detected in both boxes.

    A pair with no shared part, or a shared part whose patches have no
    comparable pixels, contributes the maximal difference 1.
    """
    parts_a = a.detection.parts()
    parts_b = b.detection.parts()
    shared = sorted(parts_a.keys() & parts_b.keys())
    if not shared:
        return 1.0
    per_part = []
    for part_id in shared:
        try:
            per_part.append(
                patch_mean_abs_diff(
                    a.frame, parts_a[part_id].position, b.frame, parts_b[part_id].position, win
                )
            )
        except EmptyOverlap:
            per_part.append(1.0)
    return math.fsum(per_part) / len(per_part)


def similarity_cost(
    a: ObservedBox,
    b: ObservedBox,
    weights: CostWeights,
    dims: FrameDims,
    win: PatchWindow = PatchWindow(),
) -> float:
    return (
        weights.alpha * cost_distance(a, b, dims)
        + weights.beta * cost_iou(a, b)
        + weights.gamma * cost_content(a, b, win)
    )
