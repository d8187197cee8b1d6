"""Fuse several annotators' interactee boxes into a single ground truth box.

Boxes are embedded as ``(cx, cy, w, h)`` points, clustered with flat-kernel
mean shift, and the member of the largest cluster with the highest mean IOU
against its fellow members is returned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyInput
from .geometry import BoundingBox, iou


@dataclass
class AnnotationSet:
    image_id: str
    person_index: int
    boxes: list[BoundingBox]

    def __post_init__(self):
        if len(self.boxes) < 1:
            raise EmptyInput(f"annotation set for {self.image_id}/{self.person_index} has no boxes")


@dataclass
class Cluster:
    members: list[int]
    mode: np.ndarray


@dataclass
class ClusterResult:
    clusters: list[Cluster] = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        n = sum(len(c.members) for c in self.clusters)
        out = np.empty(n, dtype=int)
        for label, c in enumerate(self.clusters):
            out[c.members] = label
        return out


def box_to_point(box: BoundingBox) -> np.ndarray:
    cx, cy = box.center()
    return np.array([cx, cy, box.width, box.height], dtype=float)


def mean_shift(points, bandwidth: float, max_iters: int = 300, tol: float = 1e-6) -> ClusterResult:
    """Flat-kernel mean shift.

    Every point climbs to a mode by repeatedly moving to the mean of the
    original points within ``bandwidth`` of it. Modes closer than
    ``bandwidth / 2`` to an earlier cluster's mode (scanned in index order)
    join that cluster.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise EmptyInput("mean_shift needs at least one point")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")

    modes = np.empty_like(X)
    for i, start in enumerate(X):
        cur = start.copy()
        for _ in range(max_iters):
            dist = np.linalg.norm(X - cur, axis=1)
            # the current iterate always has at least itself nearby at the start;
            # later iterates are means of in-window points so the window is non-empty
            window = X[dist <= bandwidth]
            if len(window) == 0:
                break
            nxt = window.mean(axis=0)
            shift = np.linalg.norm(nxt - cur)
            cur = nxt
            if shift <= tol:
                break
        modes[i] = cur

    clusters: list[Cluster] = []
    for i, mode in enumerate(modes):
        for c in clusters:
            if np.linalg.norm(mode - c.mode) <= bandwidth / 2.0:
                c.members.append(i)
                break
        else:
            clusters.append(Cluster(members=[i], mode=mode))
    return ClusterResult(clusters)


def default_bandwidth(image_width: float, image_height: float, fraction: float = 0.1) -> float:
    return fraction * math.hypot(image_width, image_height)


def select_max_mean_iou(boxes: list[BoundingBox]) -> int:
    """Index of the box with the largest mean IOU against the others (first on ties)."""
    if len(boxes) == 1:
        return 0
    best, best_score = 0, -1.0
    for i, bi in enumerate(boxes):
        score = sum(iou(bi, bj) for j, bj in enumerate(boxes) if j != i) / (len(boxes) - 1)
        if score > best_score:
            best, best_score = i, score
    return best


def consensus_box(annotations: AnnotationSet | list[BoundingBox], bandwidth: float) -> BoundingBox:
    boxes = annotations.boxes if isinstance(annotations, AnnotationSet) else list(annotations)
    if not boxes:
        raise EmptyInput("no annotator boxes")
    result = mean_shift([box_to_point(b) for b in boxes], bandwidth)
    # clusters are created in order of their first member, so max() keeps the earliest on ties
    largest = max(result.clusters, key=lambda c: len(c.members))
    members = [boxes[i] for i in largest.members]
    return members[select_max_mean_iou(members)]
