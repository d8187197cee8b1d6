"""Seam carving with extra energy on person and interactee boxes.

Energy is the central-difference gradient magnitude of luminance. Pixels
whose centers fall in a protected box get ``g -> (g + 5) * 5``, which makes
minimum-energy seams route around them.
"""
from __future__ import annotations

import numpy as np

from ..exceptions import TargetLargerThanSource
from ..geometry import BoundingBox

BOOST_OFFSET = 5.0
BOOST_GAIN = 5.0


def luminance(image) -> np.ndarray:
    img = np.asarray(image, dtype=float)
    if img.ndim == 2:
        return img
    return img[..., :3] @ np.array([0.299, 0.587, 0.114])


def gradient_energy(image) -> np.ndarray:
    """``|I(x+1,y) - I(x-1,y)| / 2 + |I(x,y+1) - I(x,y-1)| / 2`` with edge replication."""
    img = luminance(image)
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise ValueError("energy needs an image of at least 2x2")
    return _gradient_energy(img)


def _gradient_energy(img):
    p = np.pad(img, 1, mode="edge")
    gx = np.abs(p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = np.abs(p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    return gx + gy


def box_pixel_mask(shape, boxes) -> np.ndarray:
    """Pixels whose centers lie in any of ``boxes`` (closed)."""
    h, w = shape
    xs = np.arange(w) + 0.5
    ys = np.arange(h) + 0.5
    mask = np.zeros((h, w), dtype=bool)
    for b in boxes:
        mask |= ((ys >= b.y_min) & (ys <= b.y_max))[:, None] & ((xs >= b.x_min) & (xs <= b.x_max))[None, :]
    return mask


def boost_energy(energy, boxes) -> np.ndarray:
    e = np.array(energy, dtype=float, copy=True)
    mask = box_pixel_mask(e.shape, boxes)
    e[mask] = (e[mask] + BOOST_OFFSET) * BOOST_GAIN
    return e


def _cumulative(e):
    h, w = e.shape
    M = e.copy()
    for y in range(1, h):
        prev = M[y - 1]
        left = np.concatenate(([np.inf], prev[:-1]))
        right = np.concatenate((prev[1:], [np.inf]))
        M[y] += np.minimum(np.minimum(left, prev), right)
    return M


def find_min_vertical_seam(energy) -> np.ndarray:
    """Column index per row of the cheapest 8-connected top-to-bottom path.

    Ties resolve to the leftmost candidate, both in the last row and while
    backtracking.
    """
    e = np.asarray(energy, dtype=float)
    h, w = e.shape
    if w < 2:
        raise ValueError("need width >= 2 to find a seam")
    M = _cumulative(e)
    seam = np.empty(h, dtype=int)
    seam[-1] = int(np.argmin(M[-1]))
    for y in range(h - 2, -1, -1):
        x = seam[y + 1]
        lo, hi = max(x - 1, 0), min(x + 2, w)
        seam[y] = lo + int(np.argmin(M[y, lo:hi]))
    return seam


def find_min_horizontal_seam(energy) -> np.ndarray:
    """Row index per column; the transpose of :func:`find_min_vertical_seam`."""
    return find_min_vertical_seam(np.asarray(energy).T)


def seam_total(energy, seam) -> float:
    e = np.asarray(energy)
    return float(e[np.arange(len(seam)), seam].sum())


def _remove_vertical(arr, seam):
    h, w = arr.shape[:2]
    keep = np.ones((h, w), dtype=bool)
    keep[np.arange(h), seam] = False
    return arr[keep].reshape((h, w - 1) + arr.shape[2:])


def _shift_boxes(boxes, seam):
    """Move protected boxes so they stay aligned after removing a vertical seam."""
    h = len(seam)
    ys = np.arange(h) + 0.5
    out = []
    for b in boxes:
        rows = np.nonzero((ys >= b.y_min) & (ys <= b.y_max))[0]
        if len(rows) == 0:
            out.append(b)
            continue
        cols = seam[rows] + 0.5
        if np.all(cols < b.x_min):
            out.append(b.translate(-1.0, 0.0))
        elif np.any((cols >= b.x_min) & (cols <= b.x_max)):
            if b.width > 1.0:
                out.append(BoundingBox(b.x_min, b.y_min, b.width - 1.0, b.height))
            # a box shrunk to nothing stops protecting anything
        else:
            out.append(b)
    return out


def _carve_width(img, origin, target_w, boxes, trace):
    while img.shape[1] > target_w:
        energy = boost_energy(_gradient_energy(luminance(img)), boxes)
        seam = find_min_vertical_seam(energy)
        total = seam_total(energy, seam)
        dp_min = float(_cumulative(energy)[-1].min())
        assert np.isclose(total, dp_min, rtol=1e-12, atol=1e-9), (total, dp_min)
        if trace is not None:
            trace.append({"seam": seam, "total": total, "energy": energy,
                          "removed": origin[np.arange(len(seam)), seam].copy()})
        img = _remove_vertical(img, seam)
        origin = _remove_vertical(origin, seam)
        boxes = _shift_boxes(boxes, seam)
    return img, origin, boxes


def _transpose_box(b):
    return BoundingBox(b.y_min, b.x_min, b.height, b.width)


def retarget(image, target_w: int, target_h: int, protected=(), return_trace: bool = False):
    """Shrink ``image`` to ``(target_h, target_w)`` by removing seams.

    Vertical seams are removed first, then horizontal ones. ``protected``
    boxes (pixel coordinates of the input) are tracked through every
    removal. With ``return_trace`` a list of per-seam records is returned as
    well; each has the seam, its energy total, the boosted energy map it was
    chosen on and the original ``(row, col)`` of every removed pixel.
    """
    img = np.asarray(image)
    h, w = img.shape[:2]
    if target_w > w or target_h > h:
        raise TargetLargerThanSource(f"target {target_w}x{target_h} exceeds source {w}x{h}")
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    rows, cols = np.mgrid[0:h, 0:w]
    origin = np.stack([rows, cols], axis=-1)
    trace = [] if return_trace else None
    boxes = list(protected)

    img, origin, boxes = _carve_width(img, origin, target_w, boxes, trace)
    if img.shape[0] > target_h:
        axes = (1, 0) + tuple(range(2, img.ndim))
        n_before = len(trace) if trace is not None else 0
        img_t, origin_t, _ = _carve_width(img.transpose(axes), origin.transpose(1, 0, 2), target_h,
                                          [_transpose_box(b) for b in boxes], trace)
        img, origin = img_t.transpose(axes), origin_t.transpose(1, 0, 2)
        if trace is not None:
            for rec in trace[n_before:]:
                rec["orientation"] = "horizontal"
    if trace is not None:
        for rec in trace:
            rec.setdefault("orientation", "vertical")
    img = np.ascontiguousarray(img)
    return (img, trace) if return_trace else img
