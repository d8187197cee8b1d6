"""Caption retrieval by joint descriptor/interactee similarity, and BLEU scoring."""
from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..exceptions import LayoutMismatch, TooFewExamples
from ..features import BlockNormalizer, DescriptorVector, pair_distance_std, stack
from ..geometry import LocalizationParams

K_S = 5
_PUNCT = re.compile(f"[{re.escape(string.punctuation)}]")


def tokenize(sentence: str) -> list[str]:
    return _PUNCT.sub(" ", sentence.lower()).split()


@dataclass
class CaptionedExample:
    descriptor: DescriptorVector
    params: LocalizationParams
    sentences: list[list[str]]

    def __post_init__(self):
        if not self.sentences:
            raise ValueError("a captioned example needs at least one sentence")
        self.sentences = [[t.lower() for t in s] if not isinstance(s, str) else tokenize(s) for s in self.sentences]


class CaptionRetriever:
    """Nearest-neighbor sentence retrieval over ``(descriptor, params)`` pairs.

    The descriptor distance is block-normalized; the params distance is
    plain Euclidean over ``(dx, dy, a)``. Each is divided by its standard
    deviation over database pairs and the two are combined as
    ``sqrt(dx_n**2 + dy_n**2)``.
    """

    def __init__(self, max_pairs=1_000_000, random_state=0):
        self.max_pairs = max_pairs
        self.random_state = random_state

    def fit(self, db):
        db = list(db)
        if len(db) < 2:
            raise TooFewExamples("caption database needs at least 2 entries")
        layout, X = stack(e.descriptor for e in db)
        self.layout_ = layout
        self.normalizer_ = BlockNormalizer(list(layout), self.max_pairs, self.random_state).fit(X)
        self.Xn_ = self.normalizer_.transform(X)
        self.P_ = np.array([e.params.as_array() for e in db])
        self.sentences_ = [e.sentences for e in db]

        def dists(i, j):
            return np.stack([np.linalg.norm(self.Xn_[i] - self.Xn_[j], axis=1),
                             np.linalg.norm(self.P_[i] - self.P_[j], axis=1)], axis=1)

        rng = np.random.default_rng(self.random_state)
        std = pair_distance_std(dists, len(db), self.max_pairs, rng)
        self.s_x_, self.s_y_ = (float(s) if s >= 1e-12 else 1.0 for s in std)
        return self

    def distances(self, query_descriptor: DescriptorVector, query_params: LocalizationParams) -> np.ndarray:
        if query_descriptor.layout != self.layout_:
            raise LayoutMismatch("query descriptor layout differs from the database")
        q = self.normalizer_.transform(query_descriptor.values[None, :])[0]
        d_x = np.linalg.norm(self.Xn_ - q, axis=1)
        d_y = np.linalg.norm(self.P_ - query_params.as_array(), axis=1)
        return np.sqrt((d_x / self.s_x_) ** 2 + (d_y / self.s_y_) ** 2)

    def neighbors(self, query_descriptor, query_params, k_s=K_S) -> np.ndarray:
        if k_s > len(self.sentences_):
            raise TooFewExamples(f"k_s={k_s} exceeds database size {len(self.sentences_)}")
        d = self.distances(query_descriptor, query_params)
        return np.argsort(d, kind="stable")[:k_s]

    def retrieve(self, query_descriptor, query_params, k_s=K_S) -> list[list[str]]:
        return [s for i in self.neighbors(query_descriptor, query_params, k_s) for s in self.sentences_[i]]


def retrieve_captions(query_descriptor, query_params, db, k_s: int = K_S) -> list[list[str]]:
    db = list(db)
    if len(db) < k_s:
        raise TooFewExamples(f"k_s={k_s} exceeds database size {len(db)}")
    if len(db) == 1:
        return list(db[0].sentences)
    return CaptionRetriever().fit(db).retrieve(query_descriptor, query_params, k_s)


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate, references, max_n: int = 4) -> dict:
    """Sentence BLEU with per-order scores.

    Returns ``{"precisions": [p_1..p_N], "scores": [BP * p_n], "brevity_penalty": BP,
    "combined": BP * geometric mean}``. Zero precisions are floored at 1e-9
    inside the geometric mean only.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    references = [list(r) for r in references]
    if not references:
        raise ValueError("need at least one reference")
    candidate = list(candidate)
    c = len(candidate)
    if c == 0:
        return {"precisions": [0.0] * max_n, "scores": [0.0] * max_n, "brevity_penalty": 0.0, "combined": 0.0}

    precisions = []
    for n in range(1, max_n + 1):
        cand = _ngrams(candidate, n)
        total = sum(cand.values())
        if total == 0:
            precisions.append(0.0)
            continue
        max_ref = Counter()
        for ref in references:
            max_ref |= _ngrams(ref, n)
        clipped = sum(min(cnt, max_ref[g]) for g, cnt in cand.items())
        precisions.append(clipped / total)

    r = min((abs(len(ref) - c), len(ref)) for ref in references)[1]
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    combined = bp * math.exp(sum(math.log(max(p, 1e-9)) for p in precisions) / max_n)
    return {"precisions": precisions, "scores": [bp * p for p in precisions],
            "brevity_penalty": bp, "combined": combined}
