"""Rank scene objects by how much of them the predicted interactee box covers."""
from __future__ import annotations

from dataclasses import dataclass

from ..exceptions import EmptyInput
from ..geometry import BoundingBox, intersection_area


@dataclass(frozen=True)
class SceneObject:
    box: BoundingBox
    category: str
    object_id: str


def rank_importance(objects, predicted: BoundingBox) -> list[tuple[SceneObject, float]]:
    """Sort by covered fraction of each object's own area, most covered first.

    Ties go to the smaller object, then to the smaller ``object_id``.
    """
    objects = list(objects)
    if not objects:
        raise EmptyInput("no scene objects to rank")
    scored = [(o, intersection_area(o.box, predicted) / o.box.area) for o in objects]
    scored.sort(key=lambda t: (-t[1], t[0].box.area, str(t[0].object_id)))
    return scored
