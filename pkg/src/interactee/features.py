"""Descriptor assembly and per-block distance normalization.

A descriptor is a concatenation of named blocks (head/torso orientation,
HOG, aspect ratio, GIST, position, CNN person and scene features, or any
user-defined block). Only the geometric blocks, ``aspect`` and
``position``, are computed here; the rest come from descriptor files.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DuplicateBlockName, LayoutMismatch, TooFewExamples
from .geometry import PersonInstance

STANDARD_BLOCKS = ("theta_h", "theta_t", "hog", "aspect", "gist", "position", "cnn_p", "cnn_s")
HAND_CRAFTED_BLOCKS = ("theta_h", "theta_t", "hog", "aspect", "gist", "position")


@dataclass(frozen=True)
class DescriptorBlock:
    name: str
    values: np.ndarray = field(compare=False)

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if vals.ndim != 1:
            raise ValueError(f"block {self.name!r} must be a flat vector")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"block {self.name!r} has non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.values)


class Layout(tuple):
    """Ordered ``((name, dim), ...)`` description of a descriptor."""

    def __new__(cls, blocks=()):
        items = tuple((str(n), int(d)) for n, d in blocks)
        names = [n for n, _ in items]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DuplicateBlockName(f"duplicate block names: {dupes}")
        if any(d < 1 for _, d in items):
            raise ValueError("block dims must be >= 1")
        return super().__new__(cls, items)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self]

    @property
    def total_dim(self) -> int:
        return sum(d for _, d in self)

    @property
    def offsets(self) -> dict[str, tuple[int, int]]:
        out, off = {}, 0
        for name, dim in self:
            out[name] = (off, dim)
            off += dim
        return out

    def slices(self) -> list[slice]:
        return [slice(o, o + d) for o, d in self.offsets.values()]

    def subset(self, names) -> tuple["Layout", np.ndarray]:
        """Layout restricted to ``names`` (kept in this layout's order) and the column index."""
        keep = set(names)
        missing = keep - set(self.names)
        if missing:
            raise LayoutMismatch(f"blocks not in layout: {sorted(missing)}")
        cols, blocks = [], []
        for name, (off, dim) in self.offsets.items():
            if name in keep:
                blocks.append((name, dim))
                cols.extend(range(off, off + dim))
        return Layout(blocks), np.array(cols, dtype=int)


@dataclass(frozen=True)
class DescriptorVector:
    layout: Layout
    values: np.ndarray = field(compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.layout.total_dim,):
            raise LayoutMismatch(f"vector of shape {vals.shape} does not match layout dim {self.layout.total_dim}")
        object.__setattr__(self, "values", vals)

    def block(self, name) -> np.ndarray:
        off, dim = self.layout.offsets[name]
        return self.values[off:off + dim]

    @property
    def blocks(self) -> list[DescriptorBlock]:
        return [DescriptorBlock(name, self.block(name)) for name in self.layout.names]


def assemble(blocks) -> DescriptorVector:
    blocks = list(blocks)
    layout = Layout((b.name, b.dim) for b in blocks)
    values = np.concatenate([b.values for b in blocks]) if blocks else np.zeros(0)
    return DescriptorVector(layout, values)


def geometric_features(person: PersonInstance) -> tuple[DescriptorBlock, DescriptorBlock]:
    box = person.person_box
    cx, cy = box.center()
    aspect = DescriptorBlock("aspect", np.array([box.height / box.width]))
    position = DescriptorBlock("position", np.array([cx / person.image_width, cy / person.image_height]))
    return aspect, position


def stack(vectors) -> tuple[Layout, np.ndarray]:
    """Stack DescriptorVectors sharing one layout into a matrix."""
    vectors = list(vectors)
    if not vectors:
        raise TooFewExamples("no descriptors to stack")
    layout = vectors[0].layout
    for i, v in enumerate(vectors):
        if v.layout != layout:
            raise LayoutMismatch(f"descriptor {i} layout {list(v.layout)} != {list(layout)}")
    return layout, np.vstack([v.values for v in vectors])


def sample_pairs(n, max_pairs, rng):
    """All unordered index pairs, or ``max_pairs`` uniformly drawn ones when there are more."""
    total = n * (n - 1) // 2
    if total <= max_pairs:
        i, j = np.triu_indices(n, k=1)
        return i, j
    i = rng.integers(0, n, size=max_pairs)
    j = rng.integers(0, n - 1, size=max_pairs)
    j = j + (j >= i)
    return i, j


def pair_distance_std(D_fn, n, max_pairs, rng, chunk=200_000):
    i, j = sample_pairs(n, max_pairs, rng)
    parts = [D_fn(i[s:s + chunk], j[s:s + chunk]) for s in range(0, len(i), chunk)]
    d = np.concatenate(parts, axis=0)
    return d.std(axis=0)


class BlockNormalizer(TransformerMixin, BaseEstimator):
    """Scale each descriptor block by the spread of training distances.

    The scale of a block is the population standard deviation of the L2
    distances between training descriptors restricted to that block.
    Constant blocks (std below ``1e-12``) get scale 1. ``transform`` divides
    every block by its scale, so Euclidean distance between transformed
    rows equals :func:`normalized_distance`.
    """

    def __init__(self, layout=None, max_pairs=1_000_000, random_state=0):
        self.layout = layout
        self.max_pairs = max_pairs
        self.random_state = random_state

    def _layout(self, n_features):
        layout = Layout(self.layout) if self.layout is not None else Layout([("x", n_features)])
        if layout.total_dim != n_features:
            raise LayoutMismatch(f"layout dim {layout.total_dim} != feature count {n_features}")
        return layout

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[0] < 2:
            raise TooFewExamples("need at least 2 training descriptors")
        layout = self._layout(X.shape[1])
        slices = layout.slices()

        def dists(i, j):
            return np.stack([np.linalg.norm(X[i, sl] - X[j, sl], axis=1) for sl in slices], axis=1)

        rng = np.random.default_rng(self.random_state)
        std = pair_distance_std(dists, X.shape[0], self.max_pairs, rng)
        scales = np.where(std < 1e-12, 1.0, std)
        self.layout_ = layout
        self.scales_ = dict(zip(layout.names, (float(s) for s in scales)))
        self.n_features_in_ = X.shape[1]
        return self

    def column_scales(self) -> np.ndarray:
        check_is_fitted(self, "scales_")
        return np.concatenate([np.full(d, self.scales_[n]) for n, d in self.layout_])

    def transform(self, X):
        check_is_fitted(self, "scales_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise LayoutMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X / self.column_scales()[None, :]

    def to_dict(self) -> dict:
        check_is_fitted(self, "scales_")
        return {"layout": [list(b) for b in self.layout_], "scales": self.scales_,
                "max_pairs": self.max_pairs, "random_state": self.random_state}

    @classmethod
    def from_dict(cls, d) -> "BlockNormalizer":
        layout = Layout(tuple(b) for b in d["layout"])
        n = cls(layout=list(layout), max_pairs=d.get("max_pairs", 1_000_000), random_state=d.get("random_state", 0))
        n.layout_ = layout
        n.scales_ = {k: float(v) for k, v in d["scales"].items()}
        n.n_features_in_ = layout.total_dim
        return n


def fit_normalizer(training, max_pairs: int = 1_000_000, seed: int = 0) -> BlockNormalizer:
    training = list(training)
    if len(training) < 2:
        raise TooFewExamples("need at least 2 training descriptors")
    layout, X = stack(training)
    return BlockNormalizer(layout=list(layout), max_pairs=max_pairs, random_state=seed).fit(X)


def normalized_distance(n: BlockNormalizer, a: DescriptorVector, b: DescriptorVector) -> float:
    if a.layout != b.layout:
        raise LayoutMismatch("descriptor layouts differ")
    if a.layout != n.layout_:
        raise LayoutMismatch("normalizer was fitted on a different layout")
    total = 0.0
    for name in a.layout.names:
        d = np.linalg.norm(a.block(name) - b.block(name)) / n.scales_[name]
        total += d * d
    return float(np.sqrt(total))
