"""Locally weighted nearest-neighbor regression of interactee parameters."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import LayoutMismatch, TooFewExamples
from .features import BlockNormalizer, DescriptorVector, Layout, stack
from .geometry import LocalizationParams, PersonInstance, denormalize_to_box


class InteracteeKNNRegressor(RegressorMixin, BaseEstimator):
    """Predict ``(dx, dy, a)`` as a kernel-weighted mean of the K nearest examples.

    Distances are block-normalized Euclidean distances (see
    :class:`~interactee.features.BlockNormalizer`). Neighbor ``i`` at
    distance ``d_i`` gets weight ``exp(-d_i)``; weights are normalized to sum
    to one, so the prediction is a convex combination of neighbor targets.

    Parameters
    ----------
    k : int, default=20
        Number of neighbors.
    layout : sequence of (name, dim), optional
        Descriptor block layout. ``None`` treats all columns as one block.
    max_pairs : int, default=1_000_000
        Pair budget when estimating block scales.
    random_state : int, default=0
        Seed for pair sampling.
    """

    def __init__(self, k=20, layout=None, max_pairs=1_000_000, random_state=0):
        self.k = k
        self.layout = layout
        self.max_pairs = max_pairs
        self.random_state = random_state

    def fit(self, X, Y):
        X, Y = check_X_y(X, Y, dtype=float, multi_output=True)
        Y = Y.reshape(len(Y), -1)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(X) < self.k:
            raise TooFewExamples(f"k={self.k} exceeds the {len(X)} training examples")
        if len(X) >= 2:
            self.normalizer_ = BlockNormalizer(self.layout, self.max_pairs, self.random_state).fit(X)
        else:
            # a single example has no pairwise spread; every block keeps scale 1
            layout = Layout(self.layout) if self.layout is not None else Layout([("x", X.shape[1])])
            if layout.total_dim != X.shape[1]:
                raise LayoutMismatch(f"layout dim {layout.total_dim} != feature count {X.shape[1]}")
            self.normalizer_ = BlockNormalizer.from_dict(
                {"layout": list(layout), "scales": {n: 1.0 for n in layout.names}})
        self.layout_ = self.normalizer_.layout_
        self.X_ = X
        self.Y_ = Y
        self._Xn = self.normalizer_.transform(X)
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_examples(cls, training, k=20, **kwargs) -> "InteracteeKNNRegressor":
        """Fit from a list of ``(DescriptorVector, LocalizationParams)`` pairs."""
        training = list(training)
        if len(training) < k:
            raise TooFewExamples(f"k={k} exceeds the {len(training)} training examples")
        layout, X = stack(d for d, _ in training)
        Y = np.array([p.as_array() for _, p in training])
        return cls(k=k, layout=list(layout), **kwargs).fit(X, Y)

    def _check_query(self, X):
        check_is_fitted(self, "X_")
        if isinstance(X, DescriptorVector):
            if X.layout != self.layout_:
                raise LayoutMismatch("query layout differs from the training layout")
            X = X.values
        X = check_array(np.atleast_2d(X), dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise LayoutMismatch(f"query has {X.shape[1]} features, model expects {self.n_features_in_}")
        return X

    def kneighbors(self, X):
        """Return ``(distances, indices, weights)``, each of shape (n_queries, k).

        Neighbors are sorted by ascending distance; ties go to the lower
        training index.
        """
        X = self._check_query(X)
        Q = self.normalizer_.transform(X)
        n_q, k = len(Q), self.k
        dist = np.empty((n_q, k))
        ind = np.empty((n_q, k), dtype=int)
        for r, q in enumerate(Q):
            d = np.sqrt(((self._Xn - q) ** 2).sum(axis=1))
            order = np.argsort(d, kind="stable")[:k]
            dist[r], ind[r] = d[order], order
        raw = np.exp(-dist)
        weights = raw / raw.sum(axis=1, keepdims=True)
        return dist, ind, weights

    def predict(self, X):
        _, ind, w = self.kneighbors(X)
        return np.einsum("qk,qkc->qc", w, self.Y_[ind])

    def predict_one(self, query) -> tuple[LocalizationParams, list[tuple[int, float, float]]]:
        dist, ind, w = self.kneighbors(query)
        y = np.einsum("k,kc->c", w[0], self.Y_[ind[0]])
        neighbors = [(int(i), float(d), float(wt)) for i, d, wt in zip(ind[0], dist[0], w[0])]
        return LocalizationParams.from_array(y), neighbors

    def predict_heatmap(self, query, person: PersonInstance, grid_w: int, grid_h: int) -> np.ndarray:
        """Rasterize neighbor votes into a ``(grid_h, grid_w)`` map scaled to [0, 1].

        Each neighbor's box is projected onto ``person``; a grid cell receives
        the neighbor's weight when the cell center falls inside the box.
        """
        _, ind, w = self.kneighbors(query)
        grid = np.zeros((grid_h, grid_w))
        cx = (np.arange(grid_w) + 0.5) * person.image_width / grid_w
        cy = (np.arange(grid_h) + 0.5) * person.image_height / grid_h
        for i, wt in zip(ind[0], w[0]):
            box = denormalize_to_box(LocalizationParams.from_array(self.Y_[i]), person.person_box)
            inx = (cx >= box.x_min) & (cx <= box.x_max)
            iny = (cy >= box.y_min) & (cy <= box.y_max)
            grid[np.ix_(iny, inx)] += wt
        peak = grid.max()
        if peak > 0:
            grid /= peak
        return grid


def fit(training, k=20, **kwargs) -> InteracteeKNNRegressor:
    return InteracteeKNNRegressor.from_examples(training, k=k, **kwargs)


def predict(model: InteracteeKNNRegressor, query: DescriptorVector):
    return model.predict_one(query)


def model_to_dict(model: InteracteeKNNRegressor) -> dict:
    """Hyperparameters and fitted normalizer; training features are not included."""
    check_is_fitted(model, "X_")
    return {
        "k": model.k,
        "max_pairs": model.max_pairs,
        "random_state": model.random_state,
        "normalizer": model.normalizer_.to_dict(),
        "targets": model.Y_.tolist(),
    }


def model_from_dict(d: dict, X) -> InteracteeKNNRegressor:
    """Rebuild a fitted model from :func:`model_to_dict` output plus its training features."""
    normalizer = BlockNormalizer.from_dict(d["normalizer"])
    X = check_array(X, dtype=float)
    Y = np.array(d["targets"], dtype=float).reshape(-1, 3)
    if len(X) != len(Y):
        raise LayoutMismatch(f"{len(X)} descriptor rows for {len(Y)} stored targets")
    if X.shape[1] != normalizer.n_features_in_:
        raise LayoutMismatch("descriptor rows do not match the stored layout")
    model = InteracteeKNNRegressor(k=d["k"], layout=list(normalizer.layout_),
                                   max_pairs=d["max_pairs"], random_state=d["random_state"])
    model.normalizer_ = normalizer
    model.layout_ = normalizer.layout_
    model.X_, model.Y_ = X, Y
    model._Xn = normalizer.transform(X)
    model.n_features_in_ = X.shape[1]
    return model
