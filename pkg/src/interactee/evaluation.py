"""Position error, size error and IOU of predicted interactee boxes, plus baselines."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import EmptyInput
from .geometry import BoundingBox, PersonInstance, iou, person_scale

NEAR_PERSON_AREA_RATIO = 0.74
RANDOM_AREA_RANGE = (0.05, 1.0)


@dataclass(frozen=True)
class EvalRecord:
    image_id: str
    person_box: BoundingBox
    gt_interactee: BoundingBox
    predicted: BoundingBox


def position_error(r: EvalRecord) -> float:
    (px, py), (gx, gy) = r.predicted.center(), r.gt_interactee.center()
    return math.hypot(px - gx, py - gy) / person_scale(r.person_box)


def size_error(r: EvalRecord) -> float:
    """Absolute area difference in pixels^2 divided by the linear person scale.

    Not zoom invariant: scaling the whole scene by ``c`` scales this by ``c``.
    """
    return abs(r.predicted.area - r.gt_interactee.area) / person_scale(r.person_box)


@dataclass
class EvalReport:
    mean_position_error: float
    mean_size_error: float
    mean_iou: float
    n: int
    per_example: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["image_id", "pos_err", "size_err", "iou"])
        for row in self.per_example:
            writer.writerow([row["image_id"], repr(row["pos_err"]), repr(row["size_err"]), repr(row["iou"])])
        return buf.getvalue()


def evaluate(records) -> EvalReport:
    records = list(records)
    if not records:
        raise EmptyInput("evaluate needs at least one record")
    rows = [
        {"image_id": r.image_id, "pos_err": position_error(r), "size_err": size_error(r),
         "iou": iou(r.predicted, r.gt_interactee)}
        for r in records
    ]
    return EvalReport(
        mean_position_error=float(np.mean([r["pos_err"] for r in rows])),
        mean_size_error=float(np.mean([r["size_err"] for r in rows])),
        mean_iou=float(np.mean([r["iou"] for r in rows])),
        n=len(rows),
        per_example=rows,
    )


def near_person_baseline(person: PersonInstance | BoundingBox) -> BoundingBox:
    """Square on the person's center covering 0.74 of the person box area."""
    box = person.person_box if isinstance(person, PersonInstance) else person
    side = math.sqrt(NEAR_PERSON_AREA_RATIO * box.area)
    cx, cy = box.center()
    return BoundingBox.from_center(cx, cy, side, side)


def random_baseline(person: PersonInstance, rng_seed=None) -> BoundingBox:
    """Square with a uniform center over the image and uniform area in [0.05, 1] x image area."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    W, H = person.image_width, person.image_height
    cx, cy = rng.uniform(0.0, W), rng.uniform(0.0, H)
    lo, hi = RANDOM_AREA_RANGE
    side = math.sqrt(rng.uniform(lo, hi) * W * H)
    return BoundingBox.from_center(cx, cy, side, side)
