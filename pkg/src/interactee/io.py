"""Dataset JSON and binary descriptor store formats.

Dataset files are JSON::

    {"version": 1,
     "images": [{"image_id": "...", "width": W, "height": H, "split": "train",
                 "persons": [{"person_box": [x, y, w, h],
                              "annotator_boxes": [[x, y, w, h], ...],
                              "gt_interactee": [x, y, w, h],
                              "descriptor_ref": "key",
                              "category": "horse",
                              "captions": ["a man riding a horse"],
                              "scene_objects": [{"object_id": "o1", "category": "horse",
                                                 "box": [x, y, w, h]}]}]}]}

Boxes may also be given as ``{"x1", "y1", "x2", "y2"}`` corner dicts or
``{"x", "y", "w", "h"}`` dicts; they are always written back as lists.

Descriptor stores are a little-endian binary file: the 8-byte magic
``b"IADESC01"``, a uint32 header length, a UTF-8 JSON header with the block
layout, provenance strings and row keys, then ``n_rows x total_dim``
float64 values in row-major order.
"""
from __future__ import annotations

import json
import logging
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import LayoutMismatch, ParseError, ValidationError
from .features import DescriptorVector, Layout
from .geometry import BoundingBox, PersonInstance

logger = logging.getLogger(__name__)

DATASET_VERSION = 1
STORE_MAGIC = b"IADESC01"


@dataclass
class SceneObjectRecord:
    object_id: str
    category: str
    box: BoundingBox


@dataclass
class PersonRecord:
    person_box: BoundingBox
    descriptor_ref: str | None = None
    annotator_boxes: list[BoundingBox] | None = None
    gt_interactee: BoundingBox | None = None
    category: str | None = None
    captions: list[str] | None = None
    scene_objects: list[SceneObjectRecord] | None = None


@dataclass
class ImageRecord:
    image_id: str
    width: float
    height: float
    persons: list[PersonRecord] = field(default_factory=list)
    split: str | None = None

    def person_instance(self, index: int) -> PersonInstance:
        return PersonInstance(self.image_id, self.persons[index].person_box, self.width, self.height)


@dataclass
class Dataset:
    images: list[ImageRecord]
    version: int = DATASET_VERSION
    clamped: int = 0

    def iter_persons(self, split=None):
        """Yield ``(image, person_index, person)`` in file order, optionally filtered by split."""
        for img in self.images:
            if split is not None and img.split != split:
                continue
            for i, p in enumerate(img.persons):
                yield img, i, p


# boxes -------------------------------------------------------------------

def parse_box(raw, path) -> BoundingBox:
    try:
        if isinstance(raw, (list, tuple)) and len(raw) == 4:
            vals = [float(v) for v in raw]
            x, y, w, h = vals
        elif isinstance(raw, dict) and {"x1", "y1", "x2", "y2"} <= raw.keys():
            x1, y1, x2, y2 = (float(raw[k]) for k in ("x1", "y1", "x2", "y2"))
            x, y, w, h = min(x1, x2), min(y1, y2), abs(x2 - x1), abs(y2 - y1)
        elif isinstance(raw, dict) and {"x", "y", "w", "h"} <= raw.keys():
            x, y, w, h = (float(raw[k]) for k in ("x", "y", "w", "h"))
        else:
            raise ValidationError(f"unrecognized box {raw!r}", path)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad box {raw!r}: {exc}", path) from None
    if not all(math.isfinite(v) for v in (x, y, w, h)):
        raise ValidationError("box has non-finite coordinates", path)
    if w <= 0 or h <= 0:
        raise ValidationError(f"box width/height must be > 0, got {w}x{h}", path)
    return BoundingBox(x, y, w, h)


def _clamped(box, width, height, path, counter):
    clipped = box.clip(width, height)
    if clipped is None:
        raise ValidationError("box lies entirely outside the image", path)
    if clipped != box:
        counter[0] += 1
    return clipped


def _box_list(box):
    return box.to_list() if box is not None else None


# dataset -----------------------------------------------------------------

def parse_dataset(doc, store: "DescriptorStore | None" = None) -> Dataset:
    if not isinstance(doc, dict) or "images" not in doc:
        raise ValidationError("top level must be an object with an 'images' list")
    version = doc.get("version", DATASET_VERSION)
    if version != DATASET_VERSION:
        raise ValidationError(f"unsupported dataset version {version}", "$.version")
    if not isinstance(doc["images"], list):
        raise ValidationError("'images' must be a list", "$.images")
    seen = set()
    counter = [0]
    images = []
    for ii, raw_img in enumerate(doc["images"]):
        ipath = f"$.images[{ii}]"
        try:
            image_id = str(raw_img["image_id"])
            width, height = float(raw_img["width"]), float(raw_img["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"image needs image_id/width/height ({exc})", ipath) from None
        if image_id in seen:
            raise ValidationError(f"duplicate image_id {image_id!r}", f"{ipath}.image_id")
        seen.add(image_id)
        if not (width > 0 and height > 0 and math.isfinite(width) and math.isfinite(height)):
            raise ValidationError("image width/height must be positive", ipath)
        persons = []
        for pi, raw_p in enumerate(raw_img.get("persons", [])):
            ppath = f"{ipath}.persons[{pi}]"
            if "person_box" not in raw_p:
                raise ValidationError("person needs a person_box", ppath)

            def box(raw, sub):
                return _clamped(parse_box(raw, f"{ppath}.{sub}"), width, height, f"{ppath}.{sub}", counter)

            ref = raw_p.get("descriptor_ref")
            if ref is not None and store is not None and str(ref) not in store.index:
                raise ValidationError(f"descriptor_ref {ref!r} not found in descriptor store", f"{ppath}.descriptor_ref")
            annot = raw_p.get("annotator_boxes")
            objs = raw_p.get("scene_objects")
            persons.append(PersonRecord(
                person_box=box(raw_p["person_box"], "person_box"),
                descriptor_ref=None if ref is None else str(ref),
                annotator_boxes=None if annot is None else [box(b, f"annotator_boxes[{k}]") for k, b in enumerate(annot)],
                gt_interactee=None if raw_p.get("gt_interactee") is None else box(raw_p["gt_interactee"], "gt_interactee"),
                category=raw_p.get("category"),
                captions=None if raw_p.get("captions") is None else [str(c) for c in raw_p["captions"]],
                scene_objects=None if objs is None else [
                    SceneObjectRecord(str(o.get("object_id", k)), str(o.get("category", "")),
                                      box(o["box"], f"scene_objects[{k}].box"))
                    for k, o in enumerate(objs)
                ],
            ))
        images.append(ImageRecord(image_id, width, height, persons, raw_img.get("split")))
    if counter[0]:
        logger.warning("clamped %d boxes to image bounds", counter[0])
    return Dataset(images, version, counter[0])


def load_dataset(path, store: "DescriptorStore | None" = None) -> Dataset:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON: {exc}") from None
    return parse_dataset(doc, store)


def dataset_to_dict(ds: Dataset) -> dict:
    images = []
    for img in ds.images:
        persons = []
        for p in img.persons:
            d = {"person_box": p.person_box.to_list()}
            if p.descriptor_ref is not None:
                d["descriptor_ref"] = p.descriptor_ref
            if p.annotator_boxes is not None:
                d["annotator_boxes"] = [b.to_list() for b in p.annotator_boxes]
            if p.gt_interactee is not None:
                d["gt_interactee"] = p.gt_interactee.to_list()
            if p.category is not None:
                d["category"] = p.category
            if p.captions is not None:
                d["captions"] = list(p.captions)
            if p.scene_objects is not None:
                d["scene_objects"] = [{"object_id": o.object_id, "category": o.category, "box": o.box.to_list()}
                                      for o in p.scene_objects]
            persons.append(d)
        rec = {"image_id": img.image_id, "width": img.width, "height": img.height, "persons": persons}
        if img.split is not None:
            rec["split"] = img.split
        images.append(rec)
    return {"version": ds.version, "images": images}


def save_dataset(ds: Dataset, path):
    write_json(dataset_to_dict(ds), path)


def write_json(obj, path, indent=1):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=indent, sort_keys=True)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON: {exc}") from None


# descriptor store --------------------------------------------------------

class DescriptorStore:
    """Dense descriptor matrix with a block layout and one row per key."""

    def __init__(self, layout, keys, matrix, provenance=None):
        self.layout = Layout(layout)
        self.keys = [str(k) for k in keys]
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float64).reshape(len(self.keys), -1)
        self.provenance = dict(provenance or {})
        if self.matrix.shape[1] != self.layout.total_dim:
            raise LayoutMismatch(f"row length {self.matrix.shape[1]} != layout dim {self.layout.total_dim}")
        if len(set(self.keys)) != len(self.keys):
            raise ValidationError("duplicate descriptor keys")
        self.index = {k: i for i, k in enumerate(self.keys)}

    def __len__(self):
        return len(self.keys)

    def get(self, key) -> DescriptorVector:
        return DescriptorVector(self.layout, self.matrix[self.index[str(key)]].copy())

    def rows(self, keys, blocks=None) -> tuple[Layout, np.ndarray]:
        idx = [self.index[str(k)] for k in keys]
        X = self.matrix[idx]
        if blocks is None:
            return self.layout, X
        layout, cols = self.layout.subset(blocks)
        return layout, X[:, cols]

    def save(self, path):
        header = {
            "format": "interactee-descriptors",
            "version": 1,
            "dtype": "<f8",
            "blocks": [{"name": n, "dim": d} for n, d in self.layout],
            "keys": self.keys,
            "provenance": self.provenance,
        }
        hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(STORE_MAGIC)
            fh.write(struct.pack("<I", len(hbytes)))
            fh.write(hbytes)
            fh.write(self.matrix.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "DescriptorStore":
        data = Path(path).read_bytes()
        if data[:8] != STORE_MAGIC:
            raise ParseError(f"{path}: not a descriptor store (bad magic)")
        (hlen,) = struct.unpack("<I", data[8:12])
        try:
            header = json.loads(data[12:12 + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: corrupt header: {exc}") from None
        layout = Layout((b["name"], b["dim"]) for b in header["blocks"])
        keys = header["keys"]
        body = np.frombuffer(data[12 + hlen:], dtype="<f8")
        if body.size != len(keys) * layout.total_dim:
            raise ValidationError(f"{path}: expected {len(keys)}x{layout.total_dim} values, found {body.size}")
        return cls(layout, keys, body.reshape(len(keys), layout.total_dim).astype(np.float64),
                   header.get("provenance"))


def write_pgm(grid, path):
    """Write a [0, 1] grid as an 8-bit binary PGM scaled so the max is 255."""
    g = np.asarray(grid, dtype=float)
    peak = g.max() if g.size else 0.0
    img = np.zeros(g.shape, dtype=np.uint8) if peak <= 0 else np.round(g / peak * 255.0).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ParseError(f"{path}: not a binary PGM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data[m.end():m.end() + w * h], dtype=np.uint8).reshape(h, w)
