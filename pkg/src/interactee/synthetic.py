"""Synthetic datasets with a known interactee generator, for pipeline testing."""
from __future__ import annotations

import math

import numpy as np

from .features import geometric_features
from .geometry import BoundingBox, LocalizationParams, PersonInstance, denormalize_to_box
from .io import Dataset, DescriptorStore, ImageRecord, PersonRecord, SceneObjectRecord

SMALL = ("cup", "book", "phone", "ball")
LARGE = ("horse", "bicycle", "dog", "table")


def interactee_function(z) -> np.ndarray:
    """Ground-truth map from a latent ``(n, 3)`` pose code in [-1, 1] to ``(dx, dy, a)``."""
    z = np.atleast_2d(z)
    dx = 1.1 * z[:, 0] + 0.25 * np.sin(math.pi * z[:, 1])
    dy = 0.45 * z[:, 1] - 0.15
    a = 0.35 + 0.2 * (z[:, 2] + 1.0)
    return np.column_stack([dx, dy, a])


def _place(rng, y, W, H):
    """Pick a person box so both it and its interactee fit inside a W x H image."""
    aspect = rng.uniform(1.2, 2.6)
    s = rng.uniform(0.12, 0.25) * min(W, H)
    margin = 0.05 * min(W, H)
    while True:
        pw, ph = s / math.sqrt(aspect), s * math.sqrt(aspect)
        side = s * math.sqrt(y[2])
        # extents of the union of the two boxes relative to the person center
        left = min(-pw / 2, s * y[0] - side / 2)
        right = max(pw / 2, s * y[0] + side / 2)
        top = min(-ph / 2, s * y[1] - side / 2)
        bottom = max(ph / 2, s * y[1] + side / 2)
        if right - left < W - 2 * margin and bottom - top < H - 2 * margin:
            break
        s *= 0.8
    cx = rng.uniform(margin - left, W - margin - right)
    cy = rng.uniform(margin - top, H - margin - bottom)
    return BoundingBox.from_center(cx, cy, pw, ph)


def _jitter(rng, box, frac):
    d = rng.uniform(-frac, frac, size=4) * math.sqrt(box.area)
    x1, y1 = box.x_min + d[0], box.y_min + d[1]
    x2, y2 = box.x_max + d[2], box.y_max + d[3]
    return BoundingBox.from_corners(x1, y1, x2, y2)


def make_synthetic(n: int = 500, seed: int = 0, test_fraction: float = 0.2,
                   outlier_rate: float = 0.5, descriptor_noise: float = 0.02):
    """Build a one-person-per-image dataset and its descriptor store.

    Each person has a latent pose code ``z``. The ``pose`` descriptor block
    is ``z`` plus noise, ``clutter`` is pure noise, and ``aspect`` and
    ``position`` are the geometric blocks. The true interactee box is
    ``interactee_function(z)`` projected onto the person; annotators see it
    with a few pixels of jitter, sometimes alongside one or two far-off
    outlier boxes. ``gt_interactee`` is left empty for the consensus step.
    """
    rng = np.random.default_rng(seed)
    Z = rng.uniform(-1.0, 1.0, size=(n, 3))
    Y = interactee_function(Z)
    n_test = int(round(n * test_fraction))
    images, keys, rows = [], [], []
    for i in range(n):
        W, H = float(rng.integers(480, 801)), float(rng.integers(360, 601))
        person_box = _place(rng, Y[i], W, H)
        truth = denormalize_to_box(LocalizationParams.from_array(Y[i]), person_box)
        n_annot = int(rng.integers(5, 8))
        annot = [_jitter(rng, truth, 0.02) for _ in range(n_annot)]
        if rng.random() < outlier_rate:
            for _ in range(int(rng.integers(1, 3))):
                side = rng.uniform(0.05, 0.2) * min(W, H)
                # outliers sit in the image half away from the interactee
                cx = rng.uniform(0, W / 2) if truth.center()[0] > W / 2 else rng.uniform(W / 2, W)
                cy = rng.uniform(0, H)
                box = BoundingBox.from_center(cx, cy, side, side).clip(W, H)
                if box is not None:
                    annot.insert(int(rng.integers(0, len(annot) + 1)), box)
        category = str(rng.choice(LARGE if Y[i, 2] > 0.55 else SMALL))
        side_word = "left" if Y[i, 0] < 0 else "right"
        captions = [f"a person reaching {side_word} toward a {category}",
                    f"someone with a {category} on the {side_word}"]
        distractors = []
        for k in range(2):
            side = rng.uniform(0.05, 0.15) * min(W, H)
            box = BoundingBox.from_center(rng.uniform(0, W), rng.uniform(0, H), side, side).clip(W, H)
            if box is not None:
                distractors.append(SceneObjectRecord(f"o{k + 1}", str(rng.choice(SMALL)), box))
        objects = [SceneObjectRecord("o0", category, truth)] + distractors

        image_id = f"syn{i:05d}"
        key = f"{image_id}/0"
        person = PersonInstance(image_id, person_box, W, H)
        aspect, position = geometric_features(person)
        pose = Z[i] + descriptor_noise * rng.standard_normal(3)
        clutter = rng.standard_normal(4)
        rows.append(np.concatenate([pose, aspect.values, position.values, clutter]))
        keys.append(key)
        images.append(ImageRecord(
            image_id, W, H,
            [PersonRecord(person_box=person_box, descriptor_ref=key, annotator_boxes=annot,
                          category=category, captions=captions, scene_objects=objects)],
            split="test" if i >= n - n_test else "train",
        ))
    store = DescriptorStore(
        [("pose", 3), ("aspect", 1), ("position", 2), ("clutter", 4)], keys, np.array(rows),
        provenance={"generator": "interactee.synthetic.make_synthetic", "seed": str(seed)},
    )
    return Dataset(images), store
