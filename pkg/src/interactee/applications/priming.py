"""Restrict object detections to the neighborhood of the predicted interactee."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ..geometry import BoundingBox, iou

PRIMING_FACTOR = 1.5


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    category: str = ""


def enlarge_box(box: BoundingBox, factor: float) -> BoundingBox:
    if factor <= 0:
        raise ValueError("factor must be positive")
    cx, cy = box.center()
    return BoundingBox.from_center(cx, cy, box.width * factor, box.height * factor)


def prime_detections(detections, predicted: BoundingBox, factor: float = PRIMING_FACTOR,
                     rule: str = "center", iou_threshold: float = 0.0) -> list[Detection]:
    """Score detections outside the enlarged predicted box as ``-inf``.

    With ``rule="center"`` a detection survives when its center lies in the
    closed enlarged box. ``rule="iou"`` keeps detections whose IOU with the
    enlarged box exceeds ``iou_threshold``. Order and length are preserved.
    """
    region = enlarge_box(predicted, factor)
    out = []
    for det in detections:
        if rule == "center":
            keep = region.contains_point(*det.box.center())
        elif rule == "iou":
            keep = iou(det.box, region) > iou_threshold
        else:
            raise ValueError(f"unknown priming rule {rule!r}")
        out.append(det if keep else replace(det, score=-math.inf))
    return out
