import json

import numpy as np
import pytest

from interactee.exceptions import LayoutMismatch, ParseError, ValidationError
from interactee.features import Layout
from interactee.geometry import BoundingBox
from interactee.io import (
    DescriptorStore, dataset_to_dict, load_dataset, parse_box, parse_dataset, read_pgm, save_dataset, write_pgm,
)

MINIMAL = {"version": 1, "images": [{"image_id": "im1", "width": 100, "height": 80,
                                     "persons": [{"person_box": [10, 10, 20, 40]}]}]}


def full_doc():
    return {"version": 1, "images": [
        {"image_id": "a", "width": 200, "height": 100, "split": "train", "persons": [{
            "person_box": [10, 10, 30, 60],
            "annotator_boxes": [[50, 20, 10, 10], {"x1": 52, "y1": 21, "x2": 61, "y2": 30}],
            "gt_interactee": {"x": 50, "y": 20, "w": 10, "h": 10},
            "descriptor_ref": "a/0",
            "category": "horse",
            "captions": ["A man rides a horse."],
            "scene_objects": [{"object_id": "o1", "category": "horse", "box": [45, 15, 30, 30]}],
        }]},
        {"image_id": "b", "width": 50, "height": 50, "split": "test", "persons": []},
    ]}


def write(tmp_path, doc, name="ds.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_minimal_loads(tmp_path):
    ds = load_dataset(write(tmp_path, MINIMAL))
    assert ds.images[0].persons[0].person_box == BoundingBox(10, 10, 20, 40)
    assert ds.clamped == 0


def test_box_formats():
    assert parse_box({"x1": 5, "y1": 6, "x2": 1, "y2": 2}, "$") == BoundingBox(1, 2, 4, 4)
    assert parse_box({"x": 1, "y": 2, "w": 3, "h": 4}, "$") == BoundingBox(1, 2, 3, 4)
    with pytest.raises(ValidationError):
        parse_box([1, 2, 0, 4], "$")
    with pytest.raises(ValidationError):
        parse_box([1, 2, "nan", 4], "$")
    with pytest.raises(ValidationError):
        parse_box("box", "$")


def test_duplicate_image_id(tmp_path):
    doc = {"version": 1, "images": [MINIMAL["images"][0], MINIMAL["images"][0]]}
    with pytest.raises(ValidationError) as info:
        load_dataset(write(tmp_path, doc))
    assert "im1" in str(info.value)
    assert info.value.path == "$.images[1].image_id"


def test_validation_path_points_at_box():
    doc = json.loads(json.dumps(MINIMAL))
    doc["images"][0]["persons"][0]["person_box"] = [0, 0, -1, 5]
    with pytest.raises(ValidationError) as info:
        parse_dataset(doc)
    assert info.value.path == "$.images[0].persons[0].person_box"


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_dataset(p)


def test_clamping_counts(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["images"][0]["persons"][0]["person_box"] = [90, 70, 20, 20]
    ds = load_dataset(write(tmp_path, doc))
    assert ds.images[0].persons[0].person_box == BoundingBox(90, 70, 10, 10)
    assert ds.clamped == 1
    doc["images"][0]["persons"][0]["person_box"] = [500, 500, 20, 20]
    with pytest.raises(ValidationError):
        parse_dataset(doc)


def test_round_trip(tmp_path):
    ds = parse_dataset(full_doc())
    save_dataset(ds, tmp_path / "out.json")
    back = load_dataset(tmp_path / "out.json")
    assert dataset_to_dict(back) == dataset_to_dict(ds)
    assert back.images[0].persons[0].annotator_boxes[1] == BoundingBox(52, 21, 9, 9)
    assert [img.image_id for img, _, _ in back.iter_persons("train")] == ["a"]
    assert list(back.iter_persons("test")) == []


def test_unresolved_descriptor_ref():
    store = DescriptorStore([("pose", 2)], ["other"], np.zeros((1, 2)))
    with pytest.raises(ValidationError):
        parse_dataset(full_doc(), store)
    parse_dataset(full_doc(), DescriptorStore([("pose", 2)], ["a/0"], np.zeros((1, 2))))


def test_store_round_trip(tmp_path, rng):
    M = rng.normal(size=(5, 6))
    store = DescriptorStore([("hog", 4), ("pose", 2)], [f"k{i}" for i in range(5)], M, {"hog": "80x80, cell 8"})
    store.save(tmp_path / "d.bin")
    back = DescriptorStore.load(tmp_path / "d.bin")
    np.testing.assert_array_equal(back.matrix, M)
    assert back.layout == Layout([("hog", 4), ("pose", 2)])
    assert back.provenance == {"hog": "80x80, cell 8"}
    assert back.keys == store.keys
    layout, X = back.rows(["k3", "k0"], ["pose"])
    assert list(layout.names) == ["pose"]
    np.testing.assert_array_equal(X, M[[3, 0]][:, 4:])
    np.testing.assert_array_equal(back.get("k2").block("hog"), M[2, :4])


def test_store_file_layout(tmp_path):
    DescriptorStore([("a", 1)], ["x"], [[2.5]]).save(tmp_path / "d.bin")
    raw = (tmp_path / "d.bin").read_bytes()
    assert raw[:8] == b"IADESC01"
    assert np.frombuffer(raw[-8:], "<f8")[0] == 2.5


def test_store_errors(tmp_path):
    with pytest.raises(LayoutMismatch):
        DescriptorStore([("a", 3)], ["x"], np.zeros((1, 2)))
    with pytest.raises(ValidationError):
        DescriptorStore([("a", 1)], ["x", "x"], np.zeros((2, 1)))
    (tmp_path / "bad.bin").write_bytes(b"NOTMAGIC0000")
    with pytest.raises(ParseError):
        DescriptorStore.load(tmp_path / "bad.bin")


def test_pgm_round_trip(tmp_path):
    g = np.array([[0.0, 0.5], [1.0, 0.25]])
    write_pgm(g, tmp_path / "h.pgm")
    np.testing.assert_array_equal(read_pgm(tmp_path / "h.pgm"), [[0, 128], [255, 64]])
