"""Quantize localization space into 10 x 4 = 40 interaction types.

Two independent k-means codebooks are fitted: one on the displacement
``(dx, dy)`` with 10 centroids and one on the area ``a`` with 4 centroids.
A type id is ``xy_index * 4 + area_index``; the ordering carries no meaning.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import TooFewDistinctPoints
from .geometry import LocalizationParams

N_XY = 10
N_AREA = 4
N_TYPES = N_XY * N_AREA


@dataclass(frozen=True)
class InteractionType:
    xy_index: int
    area_index: int

    @property
    def type_id(self) -> int:
        return self.xy_index * N_AREA + self.area_index


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_plusplus(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining mass sits on existing centers; pick any unused distinct point
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers.append(X[idx])
        closest = np.minimum(closest, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def lloyd(X, k, seed, max_iter=300):
    """Lloyd's algorithm with k-means++ seeding.

    Returns ``(centroids, labels, history)`` where ``history`` holds the
    distortion (sum of squared distances) after each iteration. Empty
    clusters are re-seeded to the point farthest from its own centroid.
    """
    X = np.asarray(X, dtype=float)
    rng = np.random.default_rng(seed)
    C = kmeans_plusplus(X, k, rng)
    labels = None
    history = []
    for _ in range(max_iter):
        d = _sq_dists(X, C)
        new_labels = d.argmin(axis=1)
        own = d[np.arange(len(X)), new_labels]
        for j in range(k):
            if not np.any(new_labels == j):
                far = int(own.argmax())
                new_labels[far] = j
                own[far] = 0.0
                C[j] = X[far]
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            C[j] = X[labels == j].mean(axis=0)
        distortion = float(((X - C[labels]) ** 2).sum())
        if history and distortion > history[-1] * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"k-means distortion increased: {history[-1]} -> {distortion}")
        history.append(distortion)
    return C, labels, history


class InteractionTypeQuantizer(TransformerMixin, BaseEstimator):
    """Two-codebook k-means quantizer over ``(dx, dy, a)`` rows.

    Parameters
    ----------
    n_xy, n_area : int
        Codebook sizes; the defaults give the 40 interaction types.
    max_iter : int
        Lloyd iteration cap per codebook.
    random_state : int
        Seed for k-means++ initialization.
    """

    def __init__(self, n_xy=N_XY, n_area=N_AREA, max_iter=300, random_state=0):
        self.n_xy = n_xy
        self.n_area = n_area
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, Y, y=None):
        Y = check_array(Y, dtype=float)
        if Y.shape[1] != 3:
            raise ValueError(f"expected (n, 3) localization params, got {Y.shape}")
        n_xy_distinct = len(np.unique(Y[:, :2], axis=0))
        n_a_distinct = len(np.unique(Y[:, 2]))
        if len(Y) < self.n_xy or n_xy_distinct < self.n_xy or n_a_distinct < self.n_area:
            raise TooFewDistinctPoints(
                f"need >= {self.n_xy} distinct (dx, dy) and >= {self.n_area} distinct a values; "
                f"got {n_xy_distinct} and {n_a_distinct} from {len(Y)} rows"
            )
        ss = np.random.SeedSequence(self.random_state)
        seed_xy, seed_a = ss.spawn(2)
        self.xy_centroids_, _, self.xy_history_ = lloyd(Y[:, :2], self.n_xy, seed_xy, self.max_iter)
        self.area_centroids_, _, self.area_history_ = lloyd(Y[:, 2:], self.n_area, seed_a, self.max_iter)
        self.area_centroids_ = self.area_centroids_[:, 0]
        self.distortion_ = {"xy": self.xy_history_[-1], "area": self.area_history_[-1]}
        return self

    def assign(self, Y):
        """Return ``(xy_index, area_index)`` arrays; ties go to the lower index."""
        check_is_fitted(self, "xy_centroids_")
        Y = check_array(Y, dtype=float)
        xy = _sq_dists(Y[:, :2], self.xy_centroids_).argmin(axis=1)
        area = np.abs(Y[:, 2:3] - self.area_centroids_[None, :]).argmin(axis=1)
        return xy, area

    def predict(self, Y):
        xy, area = self.assign(Y)
        return xy * self.n_area + area

    def transform(self, Y):
        return self.predict(Y)[:, None]

    # persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        check_is_fitted(self, "xy_centroids_")
        return {
            "format": "interactee-codebook",
            "version": 1,
            "seed": self.random_state,
            "n_xy": self.n_xy,
            "n_area": self.n_area,
            "max_iter": self.max_iter,
            "xy_centroids": self.xy_centroids_.tolist(),
            "area_centroids": self.area_centroids_.tolist(),
            "distortion": self.distortion_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionTypeQuantizer":
        q = cls(n_xy=d["n_xy"], n_area=d["n_area"], max_iter=d.get("max_iter", 300), random_state=d["seed"])
        q.xy_centroids_ = np.array(d["xy_centroids"], dtype=float).reshape(-1, 2)
        q.area_centroids_ = np.array(d["area_centroids"], dtype=float)
        q.distortion_ = dict(d.get("distortion", {}))
        q.xy_history_, q.area_history_ = [], []
        return q

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _params_matrix(examples) -> np.ndarray:
    return np.array([p.as_array() if isinstance(p, LocalizationParams) else p for p in examples], dtype=float)


def fit_quantizer(examples, seed: int = 0) -> InteractionTypeQuantizer:
    return InteractionTypeQuantizer(random_state=seed).fit(_params_matrix(examples))


def assign_type(q: InteractionTypeQuantizer, params: LocalizationParams) -> InteractionType:
    xy, area = q.assign(params.as_array()[None, :])
    return InteractionType(int(xy[0]), int(area[0]))


def type_distribution(assignments) -> dict[int, dict]:
    """Per-type category distribution and its natural-log entropy.

    ``assignments`` is an iterable of ``(InteractionType | type_id, label)``.
    Every one of the 40 type ids is present; unused ones have empty
    distributions and zero entropy.
    """
    counts: dict[int, Counter] = {t: Counter() for t in range(N_TYPES)}
    for t, label in assignments:
        tid = t.type_id if isinstance(t, InteractionType) else int(t)
        counts.setdefault(tid, Counter())[label] += 1
    out = {}
    for tid, c in counts.items():
        total = sum(c.values())
        dist = {k: v / total for k, v in sorted(c.items())} if total else {}
        entropy = -sum(p * math.log(p) for p in dist.values() if p > 0)
        out[tid] = {"count": total, "distribution": dist, "entropy": entropy}
    return out
