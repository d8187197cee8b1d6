"""Command-line entry point: ``interactee <subcommand> ...``.

Exit status is 0 on success, 1 on invalid input files and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .applications import (
    Detection, SceneObject, bleu, prime_detections, rank_importance, retarget, tokenize,
)
from .applications.captions import CaptionedExample, CaptionRetriever, K_S
from .consensus import consensus_box, default_bandwidth
from .evaluation import EvalRecord, evaluate, near_person_baseline, random_baseline
from .exceptions import InteracteeError
from .features import DescriptorVector
from .geometry import BoundingBox, LocalizationParams, denormalize_to_box, normalize_localization
from .interaction_types import InteractionTypeQuantizer, type_distribution
from .io import (
    DescriptorStore, load_dataset, parse_box, read_json, save_dataset, write_json, write_pgm,
)
from .knn import model_from_dict, model_to_dict, InteracteeKNNRegressor
from .mdn import MixtureDensityRegressor

logger = logging.getLogger("interactee")


class UsageError(Exception):
    pass


def _relpath(target, start_file):
    return os.path.relpath(os.path.abspath(target), os.path.dirname(os.path.abspath(start_file)))


def _resolve(path, relative_to_file):
    p = Path(path)
    return p if p.is_absolute() else Path(os.path.dirname(os.path.abspath(relative_to_file))) / p


def _blocks_arg(value):
    return None if not value else [b.strip() for b in value.split(",") if b.strip()]


def _training_rows(ds, store, split, blocks):
    """Descriptor matrix and GT params for persons that have both."""
    refs, Y = [], []
    for img, _, p in ds.iter_persons(split):
        if p.gt_interactee is None or p.descriptor_ref is None:
            continue
        refs.append(p.descriptor_ref)
        Y.append(normalize_localization(p.person_box, p.gt_interactee).as_array())
    if not refs:
        raise UsageError(f"no persons with gt_interactee and descriptor_ref in split {split!r}")
    layout, X = store.rows(refs, blocks)
    return refs, layout, X, np.array(Y)


# subcommands -------------------------------------------------------------

def cmd_synth(args):
    from .synthetic import make_synthetic

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds, store = make_synthetic(args.n, args.seed, args.test_fraction)
    save_dataset(ds, out / "dataset.json")
    store.save(out / "descriptors.bin")
    print(f"wrote {len(ds.images)} images to {out}")


def cmd_consensus(args):
    ds = load_dataset(args.dataset)
    done = 0
    for img, _, p in ds.iter_persons():
        if not p.annotator_boxes:
            continue
        bw = args.bandwidth if args.bandwidth else default_bandwidth(img.width, img.height, args.bandwidth_frac)
        p.gt_interactee = consensus_box(p.annotator_boxes, bw)
        done += 1
    save_dataset(ds, args.out)
    print(f"consensus boxes for {done} persons")


def cmd_quantize(args):
    ds = load_dataset(args.dataset)
    rows, labels, ids = [], [], []
    for img, i, p in ds.iter_persons(args.split):
        if p.gt_interactee is None:
            continue
        rows.append(normalize_localization(p.person_box, p.gt_interactee).as_array())
        labels.append(p.category or "unknown")
        ids.append((img.image_id, i))
    if not rows:
        raise UsageError("no persons with gt_interactee")
    Y = np.array(rows)
    q = InteractionTypeQuantizer(random_state=args.seed).fit(Y)
    q.save(args.out)
    if args.assignments:
        types = q.predict(Y)
        dist = type_distribution(zip(types.tolist(), labels))
        write_json({
            "assignments": [{"image_id": iid, "person_index": pi, "type_id": int(t)}
                            for (iid, pi), t in zip(ids, types)],
            "types": {str(t): v for t, v in dist.items()},
        }, args.assignments)
    print(f"fitted 40-type codebook on {len(Y)} examples")


def cmd_fit_knn(args):
    ds = load_dataset(args.dataset)
    store = DescriptorStore.load(args.descriptors)
    refs, layout, X, Y = _training_rows(ds, store, args.split, _blocks_arg(args.blocks))
    model = InteracteeKNNRegressor(k=args.k, layout=list(layout), max_pairs=args.max_pairs,
                                   random_state=args.seed).fit(X, Y)
    doc = {"format": "interactee-knn", "version": 1, "descriptors": _relpath(args.descriptors, args.out),
           "blocks": layout.names, "keys": refs, **model_to_dict(model)}
    write_json(doc, args.out)
    print(f"stored knn model over {len(refs)} examples (k={args.k})")


def cmd_train_mdn(args):
    ds = load_dataset(args.dataset)
    store = DescriptorStore.load(args.descriptors)
    refs, layout, X, Y = _training_rows(ds, store, args.split, _blocks_arg(args.blocks))
    est = MixtureDensityRegressor(
        hidden_dims=tuple(args.hidden), n_components=args.components, iterations=args.iterations,
        learning_rate=args.lr, batch_size=args.batch_size, random_state=args.seed,
    ).fit(X, Y)
    doc = {"format": "interactee-mdn-model", "version": 1, "blocks": layout.names, **est.to_dict()}
    write_json(doc, args.out, indent=None)
    tail = est.loss_history_[-100:]
    print(f"trained mdn on {len(refs)} examples; final mean loss {float(np.mean(tail)):.4f}")


def _load_model(kind, path, k_override):
    doc = read_json(path)
    if kind == "knn":
        store = DescriptorStore.load(_resolve(doc["descriptors"], path))
        _, X = store.rows(doc["keys"], doc["blocks"])
        model = model_from_dict(doc, X)
        if k_override:
            if k_override > len(X):
                raise UsageError(f"--k {k_override} exceeds {len(X)} training examples")
            model.k = k_override
        return model, doc["blocks"]
    return MixtureDensityRegressor.from_dict(doc), doc["blocks"]


def cmd_predict(args):
    model, blocks = _load_model(args.model, args.model_file, args.k)
    ds = load_dataset(args.dataset)
    store = DescriptorStore.load(args.descriptors)
    targets = [(img, i, p) for img, i, p in ds.iter_persons(args.split) if p.descriptor_ref is not None]
    if not targets:
        raise UsageError("nothing to predict")
    layout, X = store.rows([p.descriptor_ref for _, _, p in targets], blocks)
    P = model.predict(X)
    if args.heatmap_dir:
        if args.model != "knn":
            raise UsageError("--heatmap-dir requires --model knn")
        Path(args.heatmap_dir).mkdir(parents=True, exist_ok=True)
    out = []
    for row, (img, i, p), y in zip(X, targets, P):
        params = LocalizationParams(float(y[0]), float(y[1]), float(y[2]))
        box = denormalize_to_box(params, p.person_box)
        out.append({"image_id": img.image_id, "person_index": i,
                    "params": [params.dx, params.dy, params.a], "box": box.to_list()})
        if args.heatmap_dir:
            grid = model.predict_heatmap(row, img.person_instance(i), args.grid[0], args.grid[1])
            write_pgm(grid, Path(args.heatmap_dir) / f"{img.image_id}_{i}.pgm")
    write_json({"version": 1, "model": args.model, "predictions": out}, args.out)
    print(f"predicted {len(out)} interactees")


def _predictions_by_key(path):
    doc = read_json(path)
    return {(p["image_id"], int(p["person_index"])): p for p in doc["predictions"]}


def cmd_evaluate(args):
    ds = load_dataset(args.dataset)
    preds = _predictions_by_key(args.predictions)
    rng = np.random.default_rng(args.seed)
    records = {"model": [], "near_person": [], "random": []}
    for img, i, p in ds.iter_persons(args.split):
        key = (img.image_id, i)
        if p.gt_interactee is None or key not in preds:
            continue
        person = img.person_instance(i)
        for name, box in (("model", parse_box(preds[key]["box"], "$.box")),
                          ("near_person", near_person_baseline(person)),
                          ("random", random_baseline(person, rng))):
            records[name].append(EvalRecord(img.image_id, p.person_box, p.gt_interactee, box))
    if not records["model"]:
        raise UsageError("no predictions match persons with gt_interactee")
    reports = {name: evaluate(recs) for name, recs in records.items()}
    summary = {name: {"mean_position_error": r.mean_position_error, "mean_size_error": r.mean_size_error,
                      "mean_iou": r.mean_iou, "n": r.n} for name, r in reports.items()}
    doc = {"version": 1, "methods": summary,
           "per_example": {name: r.per_example for name, r in reports.items()}}
    write_json(doc, args.out)
    if args.csv:
        Path(args.csv).write_text(reports["model"].to_csv())
    print(f"{'method':<12} {'pos_err':>9} {'size_err':>10} {'iou':>7}")
    for name, s in summary.items():
        print(f"{name:<12} {s['mean_position_error']:9.4f} {s['mean_size_error']:10.2f} {s['mean_iou']:7.4f}")


def cmd_prime(args):
    preds = _predictions_by_key(args.predictions)
    doc = read_json(args.detections)
    by_image: dict[tuple, list] = {}
    for k, d in enumerate(doc["detections"]):
        key = (str(d["image_id"]), int(d.get("person_index", 0)))
        by_image.setdefault(key, []).append(k)
    out = [dict(d) for d in doc["detections"]]
    for key, idxs in by_image.items():
        if key not in preds:
            continue
        dets = [Detection(parse_box(doc["detections"][k]["box"], f"$.detections[{k}].box"),
                          float(doc["detections"][k]["score"]), str(doc["detections"][k].get("category", "")))
                for k in idxs]
        primed = prime_detections(dets, parse_box(preds[key]["box"], "$.box"), args.factor)
        for k, det in zip(idxs, primed):
            out[k]["score"] = det.score
    write_json({"detections": out}, args.out)
    kept = sum(1 for d in out if math.isfinite(d["score"]))
    print(f"{kept}/{len(out)} detections kept")


def _parse_box_arg(text):
    try:
        x, y, w, h = (float(v) for v in text.split(","))
        return BoundingBox(x, y, w, h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected x,y,w,h: {exc}")


def cmd_retarget(args):
    from PIL import Image

    img = np.asarray(Image.open(args.image).convert("RGB"), dtype=float)
    boxes = list(args.box or [])
    if args.dataset:
        if not (args.image_id and args.predictions):
            raise UsageError("--dataset needs --image-id and --predictions")
        ds = load_dataset(args.dataset)
        preds = _predictions_by_key(args.predictions)
        for im, i, p in ds.iter_persons():
            if im.image_id == args.image_id:
                boxes.append(p.person_box)
                if (im.image_id, i) in preds:
                    boxes.append(parse_box(preds[(im.image_id, i)]["box"], "$.box"))
    out = retarget(img, args.width, args.height, boxes)
    Image.fromarray(np.clip(np.round(out), 0, 255).astype(np.uint8)).save(args.out)
    print(f"retargeted {img.shape[1]}x{img.shape[0]} -> {args.width}x{args.height}")


def cmd_importance(args):
    ds = load_dataset(args.dataset)
    preds = _predictions_by_key(args.predictions)
    results = []
    for img, i, p in ds.iter_persons(args.split):
        if not p.scene_objects or (img.image_id, i) not in preds:
            continue
        objs = [SceneObject(o.box, o.category, o.object_id) for o in p.scene_objects]
        ranked = rank_importance(objs, parse_box(preds[(img.image_id, i)]["box"], "$.box"))
        results.append({"image_id": img.image_id, "person_index": i,
                        "ranking": [{"object_id": o.object_id, "category": o.category, "score": s}
                                    for o, s in ranked]})
    write_json({"version": 1, "results": results}, args.out)
    print(f"ranked objects for {len(results)} persons")


def cmd_caption(args):
    ds = load_dataset(args.dataset)
    store = DescriptorStore.load(args.descriptors)
    preds = _predictions_by_key(args.predictions)
    blocks = _blocks_arg(args.blocks)
    db = []
    for img, i, p in ds.iter_persons(args.db_split):
        if p.captions and p.gt_interactee is not None and p.descriptor_ref is not None:
            layout, X = store.rows([p.descriptor_ref], blocks)
            db.append(CaptionedExample(DescriptorVector(layout, X[0]),
                                       normalize_localization(p.person_box, p.gt_interactee), p.captions))
    if len(db) < args.k_s:
        raise UsageError(f"caption database has {len(db)} entries, fewer than --k-s {args.k_s}")
    retriever = CaptionRetriever(random_state=args.seed).fit(db)
    results, scores = [], []
    for img, i, p in ds.iter_persons(args.query_split):
        key = (img.image_id, i)
        if key not in preds or p.descriptor_ref is None:
            continue
        layout, X = store.rows([p.descriptor_ref], blocks)
        sentences = retriever.retrieve(DescriptorVector(layout, X[0]),
                                       LocalizationParams.from_array(preds[key]["params"]), args.k_s)
        entry = {"image_id": img.image_id, "person_index": i, "sentences": [" ".join(s) for s in sentences]}
        if p.captions:
            refs = [tokenize(c) for c in p.captions]
            per = [bleu(s, refs, args.max_n) for s in sentences]
            entry["bleu"] = {"scores": np.mean([b["scores"] for b in per], axis=0).tolist(),
                             "combined": float(np.mean([b["combined"] for b in per]))}
            scores.append(entry["bleu"])
        results.append(entry)
    doc = {"version": 1, "k_s": args.k_s, "results": results}
    if scores:
        doc["mean_bleu"] = {"scores": np.mean([s["scores"] for s in scores], axis=0).tolist(),
                            "combined": float(np.mean([s["combined"] for s in scores]))}
    write_json(doc, args.out)
    print(f"retrieved captions for {len(results)} queries")


def cmd_bleu(args):
    cands = Path(args.candidates).read_text().splitlines()
    refs = Path(args.references).read_text().splitlines()
    if len(cands) != len(refs):
        raise UsageError(f"{len(cands)} candidates but {len(refs)} reference lines")
    rows = []
    for c, r in zip(cands, refs):
        rows.append(bleu(tokenize(c), [tokenize(x) for x in r.split("|||")], args.max_n))
    mean = {"scores": np.mean([r["scores"] for r in rows], axis=0).tolist() if rows else [],
            "combined": float(np.mean([r["combined"] for r in rows])) if rows else 0.0}
    doc = {"version": 1, "max_n": args.max_n, "per_sentence": rows, "mean": mean}
    if args.out:
        write_json(doc, args.out)
    print(" ".join(f"BLEU-{n + 1}={s:.4f}" for n, s in enumerate(mean["scores"])) + f" combined={mean['combined']:.4f}")


# parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="interactee", description="Predict where a person's interactee is.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset and descriptor store")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("consensus", help="fuse annotator boxes into gt_interactee")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--bandwidth", type=float, help="mean-shift radius in pixels")
    p.add_argument("--bandwidth-frac", type=float, default=0.1, help="radius as a fraction of the image diagonal")
    p.set_defaults(func=cmd_consensus)

    p = sub.add_parser("quantize", help="fit the 40 interaction types")
    p.add_argument("dataset")
    p.add_argument("--out", required=True, help="codebook JSON")
    p.add_argument("--assignments", help="write per-person types and per-type category distributions")
    p.add_argument("--split")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("fit-knn", help="store a nearest-neighbor model")
    p.add_argument("dataset")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--split", default=None)
    p.add_argument("--blocks", help="comma-separated descriptor blocks to use (default: all)")
    p.add_argument("--max-pairs", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit_knn)

    p = sub.add_parser("train-mdn", help="train a mixture density network")
    p.add_argument("dataset")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--blocks")
    p.add_argument("--hidden", type=int, nargs="+", default=[64])
    p.add_argument("--components", type=int, default=5)
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_mdn)

    p = sub.add_parser("predict", help="predict interactee boxes")
    p.add_argument("dataset")
    p.add_argument("--model", choices=["knn", "mdn"], required=True)
    p.add_argument("--model-file", required=True)
    p.add_argument("--descriptors", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--k", type=int, help="override the stored K (knn only)")
    p.add_argument("--heatmap-dir", help="write one PGM vote map per person (knn only)")
    p.add_argument("--grid", type=int, nargs=2, default=[64, 48], metavar=("W", "H"))
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="position/size error and IOU against baselines")
    p.add_argument("dataset")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.add_argument("--split", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("prime", help="discard detections far from the predicted interactee")
    p.add_argument("--detections", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--factor", type=float, default=1.5)
    p.set_defaults(func=cmd_prime)

    p = sub.add_parser("retarget", help="seam-carve an image, protecting person and interactee")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--box", type=_parse_box_arg, action="append", help="protected box x,y,w,h (repeatable)")
    p.add_argument("--dataset")
    p.add_argument("--image-id")
    p.add_argument("--predictions")
    p.set_defaults(func=cmd_retarget)

    p = sub.add_parser("importance", help="rank scene objects by overlap with the interactee")
    p.add_argument("dataset")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("caption", help="retrieve sentences from nearest captioned examples")
    p.add_argument("dataset")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k-s", type=int, default=K_S)
    p.add_argument("--db-split", default="train")
    p.add_argument("--query-split", default="test")
    p.add_argument("--blocks")
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("bleu", help="score candidate sentences against references")
    p.add_argument("--candidates", required=True, help="one sentence per line")
    p.add_argument("--references", required=True, help="one line per candidate, alternatives split by '|||'")
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bleu)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"interactee {args.command}: {exc}", file=sys.stderr)
        return 2
    except (InteracteeError, KeyError, OSError) as exc:
        print(f"interactee {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
