"""Box arithmetic and the person-normalized interactee parameterization.

Boxes are ``(x_min, y_min, width, height)`` in pixels. Localization
parameters ``(dx, dy, a)`` express the interactee relative to a person:
center displacement divided by the person scale, and area divided by the
squared person scale. The person scale is ``sqrt(width * height)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    width: float
    height: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.width, self.height)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates: {vals}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"box width and height must be > 0, got {self.width}x{self.height}")

    @classmethod
    def from_corners(cls, x1, y1, x2, y2) -> "BoundingBox":
        return cls(float(min(x1, x2)), float(min(y1, y2)), float(abs(x2 - x1)), float(abs(y2 - y1)))

    @classmethod
    def from_center(cls, cx, cy, width, height) -> "BoundingBox":
        return cls(cx - width / 2.0, cy - height / 2.0, float(width), float(height))

    @property
    def x_max(self) -> float:
        return self.x_min + self.width

    @property
    def y_max(self) -> float:
        return self.y_min + self.height

    @property
    def area(self) -> float:
        return self.width * self.height

    def center(self) -> tuple[float, float]:
        return (self.x_min + self.width / 2.0, self.y_min + self.height / 2.0)

    def contains_point(self, x, y) -> bool:
        """Closed containment test."""
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def translate(self, tx, ty) -> "BoundingBox":
        return BoundingBox(self.x_min + tx, self.y_min + ty, self.width, self.height)

    def scale(self, c) -> "BoundingBox":
        """Scale position and size about the image origin."""
        return BoundingBox(self.x_min * c, self.y_min * c, self.width * c, self.height * c)

    def clip(self, width, height) -> "BoundingBox | None":
        """Clamp to ``[0, width] x [0, height]``; ``None`` if nothing is left."""
        if self.x_min >= 0 and self.y_min >= 0 and self.x_max <= width and self.y_max <= height:
            return self
        x1, y1 = max(self.x_min, 0.0), max(self.y_min, 0.0)
        x2, y2 = min(self.x_max, float(width)), min(self.y_max, float(height))
        if x2 <= x1 or y2 <= y1:
            return None
        return BoundingBox(x1, y1, x2 - x1, y2 - y1)

    def to_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.width, self.height]


@dataclass(frozen=True)
class LocalizationParams:
    dx: float
    dy: float
    a: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.dx, self.dy, self.a)):
            raise ValueError(f"non-finite localization params {(self.dx, self.dy, self.a)}")
        if self.a <= 0:
            raise ValueError(f"localization area must be > 0, got {self.a}")

    @classmethod
    def from_array(cls, arr) -> "LocalizationParams":
        dx, dy, a = (float(v) for v in arr)
        return cls(dx, dy, a)

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.a], dtype=float)


@dataclass(frozen=True)
class PersonInstance:
    image_id: str
    person_box: BoundingBox
    image_width: float
    image_height: float

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")


def person_scale(person_box: BoundingBox) -> float:
    return math.sqrt(person_box.width * person_box.height)


def normalize_localization(person_box: BoundingBox, interactee_box: BoundingBox) -> LocalizationParams:
    s = person_scale(person_box)
    cxp, cyp = person_box.center()
    cxi, cyi = interactee_box.center()
    return LocalizationParams((cxi - cxp) / s, (cyi - cyp) / s, interactee_box.area / (s * s))


def denormalize_to_box(params: LocalizationParams, person_box: BoundingBox) -> BoundingBox:
    """Map params back to pixels as a square box. Not clipped to the image."""
    if params.a <= 0:
        raise ValueError("params.a must be positive")
    s = person_scale(person_box)
    cxp, cyp = person_box.center()
    side = s * math.sqrt(params.a)
    return BoundingBox.from_center(cxp + s * params.dx, cyp + s * params.dy, side, side)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    if a == b:
        return 1.0
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def boxes_to_array(boxes) -> np.ndarray:
    """Stack boxes into an ``(n, 4)`` array of ``x_min, y_min, width, height``."""
    return np.array([b.to_list() for b in boxes], dtype=float).reshape(-1, 4)
