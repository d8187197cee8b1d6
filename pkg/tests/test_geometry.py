import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from interactee.geometry import (
    BoundingBox, LocalizationParams, denormalize_to_box, intersection_area, iou,
    normalize_localization, person_scale,
)

from conftest import boxes


@pytest.mark.parametrize("box, expected", [
    (BoundingBox(0, 0, 100, 100), 100.0),
    (BoundingBox(0, 0, 4, 9), 6.0),
    (BoundingBox(5, 5, 1, 1), 1.0),
])
def test_person_scale(box, expected):
    assert person_scale(box) == expected


def test_box_rejects_degenerate():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 0, 5)
    with pytest.raises(ValueError):
        BoundingBox(0, 0, float("nan"), 5)


def test_center():
    assert BoundingBox(10, 20, 30, 40).center() == (25.0, 40.0)


@pytest.mark.parametrize("interactee, expected", [
    (BoundingBox(0, 0, 100, 100), (0.0, 0.0, 1.0)),
    (BoundingBox(100, 50, 50, 50), (0.75, 0.25, 0.25)),
    (BoundingBox(-50, 0, 100, 100), (-0.5, 0.0, 1.0)),
    (BoundingBox(-100, 0, 100, 100), (-1.0, 0.0, 1.0)),
])
def test_normalize_localization(interactee, expected):
    p = normalize_localization(BoundingBox(0, 0, 100, 100), interactee)
    assert (p.dx, p.dy, p.a) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("params, person, center, side", [
    ((0, 0, 1), BoundingBox(0, 0, 100, 100), (50, 50), 100),
    ((0.75, 0.25, 0.25), BoundingBox(0, 0, 100, 100), (125, 75), 50),
    ((0, 0, 4), BoundingBox(0, 0, 10, 10), (5, 5), 20),
])
def test_denormalize_to_box(params, person, center, side):
    box = denormalize_to_box(LocalizationParams(*params), person)
    assert box.center() == pytest.approx(center)
    assert box.width == pytest.approx(side) and box.height == pytest.approx(side)


def test_localization_params_requires_positive_area():
    with pytest.raises(ValueError):
        LocalizationParams(0, 0, 0)


def test_iou_hand_cases():
    b = BoundingBox(3, 4, 5, 6)
    assert iou(b, b) == 1.0
    assert iou(BoundingBox(0, 0, 1, 1), BoundingBox(5, 5, 1, 1)) == 0.0
    assert iou(BoundingBox(0, 0, 2, 2), BoundingBox(1, 0, 2, 2)) == 1 / 3
    # touching edges share no area
    assert iou(BoundingBox(0, 0, 1, 1), BoundingBox(1, 0, 1, 1)) == 0.0


def test_intersection_area():
    assert intersection_area(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 10, 10)) == 50.0


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0
    if a != b:
        assert v < 1.0 or math.isclose(v, 1.0)


@given(boxes(), boxes(), st.floats(-500, 500), st.floats(-500, 500))
def test_normalize_translation_invariant(p, i, tx, ty):
    a = normalize_localization(p, i).as_array()
    b = normalize_localization(p.translate(tx, ty), i.translate(tx, ty)).as_array()
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9 * (1 + np.abs(a).max()))


@given(boxes(), boxes(), st.floats(0.01, 100))
def test_normalize_scale_invariant(p, i, c):
    a = normalize_localization(p, i).as_array()
    b = normalize_localization(p.scale(c), i.scale(c)).as_array()
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


@given(boxes(), boxes())
def test_round_trip_preserves_center_and_area(p, i):
    back = denormalize_to_box(normalize_localization(p, i), p)
    assert back.center() == pytest.approx(i.center(), rel=1e-9, abs=1e-7)
    assert back.area == pytest.approx(i.area, rel=1e-9)
    assert back.width == back.height
