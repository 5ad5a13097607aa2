#!/usr/bin/env python3
"""Regenerates the evaluation fixtures under tests/fixtures/ and freezes
reference metric values computed with pycocotools.

Usage: python3 tests/reference/make_fixtures.py

Requires numpy and pycocotools. The C++ test suites only read the
generated files; this script is not part of the build.
"""

import contextlib
import io
import json
import os

import numpy as np
from pycocotools.coco import COCO
from pycocotools.cocoeval import COCOeval

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, "..", "fixtures")

METRIC_NAMES = ["AP", "AP50", "AP75", "AP_small", "AP_medium", "AP_large",
                "AR1", "AR10", "AR100", "AR_small", "AR_medium", "AR_large"]


def write_json(name, obj):
    with open(os.path.join(FIXTURES, name), "w") as f:
        json.dump(obj, f, indent=1)
        f.write("\n")


def coco_stats(gt, dets):
    """Runs the reference evaluator quietly and returns the 12 stats."""
    with contextlib.redirect_stdout(io.StringIO()):
        coco_gt = COCO()
        coco_gt.dataset = json.loads(json.dumps(gt))
        coco_gt.createIndex()
        if dets:
            coco_dt = coco_gt.loadRes(json.loads(json.dumps(dets)))
        else:
            coco_dt = COCO()
            coco_dt.dataset = {"images": gt["images"], "categories": gt["categories"], "annotations": []}
            coco_dt.createIndex()
        ev = COCOeval(coco_gt, coco_dt, "bbox")
        ev.evaluate()
        ev.accumulate()
        ev.summarize()
    return {k: float(v) for k, v in zip(METRIC_NAMES, ev.stats)}


def annotation_file(images, anns, categories):
    return {
        "images": [{"id": i, "width": 640, "height": 480} for i in images],
        "annotations": anns,
        "categories": [{"id": c, "name": "class%d" % c} for c in categories],
    }


# --- literal hard-mode Confluence (independent of the C++ code) -----------

def normalized_proximity(a, b):
    xs = [a[0], a[2], b[0], b[2]]
    ys = [a[1], a[3], b[1], b[3]]

    def scale(v, lo, hi):
        return (v - lo) / (hi - lo) if hi > lo else 0.0

    lx, hx, ly, hy = min(xs), max(xs), min(ys), max(ys)
    na = [scale(a[0], lx, hx), scale(a[1], ly, hy), scale(a[2], lx, hx), scale(a[3], ly, hy)]
    nb = [scale(b[0], lx, hx), scale(b[1], ly, hy), scale(b[2], lx, hx), scale(b[3], ly, hy)]
    return abs(nb[0] - na[0]) + abs(nb[1] - na[1]) + abs(nb[2] - na[2]) + abs(nb[3] - na[3])


def confluence_hard(dets, ct):
    """dets: list of dicts with corners 'box', 'score', 'id' (one image, one class)."""
    order = sorted(dets, key=lambda d: (-d["score"], d["box"], d["id"]))
    weight, neighbours = {}, {}
    for bi in order:
        total, nb = 0.0, set()
        for bj in order:
            if bj is bi:
                continue
            p = normalized_proximity(bi["box"], bj["box"])
            if p < ct:
                total += p
                nb.add(bj["id"])
        neighbours[bi["id"]] = nb
        if nb:
            weight[bi["id"]] = (total / len(nb)) * (1 - bi["score"])
        else:
            weight[bi["id"]] = 2 + 2 * (1 - bi["score"])
    pool = {d["id"]: d for d in order}
    kept = []
    while pool:
        m = min(pool.values(), key=lambda d: (weight[d["id"]], -d["score"], d["box"], d["id"]))
        kept.append(m)
        del pool[m["id"]]
        for n in neighbours[m["id"]]:
            pool.pop(n, None)
    return kept


def to_records(dets):
    out = []
    for d in dets:
        x1, y1, x2, y2 = d["box"]
        out.append({"image_id": d["image_id"], "category_id": d["category_id"],
                    "bbox": [x1, y1, x2 - x1, y2 - y1], "score": d["score"]})
    return out


def from_records(records):
    out = []
    for i, r in enumerate(records):
        x, y, w, h = r["bbox"]
        out.append({"box": (x, y, x + w, y + h), "score": r["score"], "id": i,
                    "image_id": r["image_id"], "category_id": r["category_id"]})
    return out


def suppress_per_group(records, ct):
    dets = from_records(records)
    groups = {}
    for d in dets:
        groups.setdefault((d["image_id"], d["category_id"]), []).append(d)
    kept = []
    for key in sorted(groups):
        kept.extend(confluence_hard(groups[key], ct))
    return to_records(kept)


# --- fixtures --------------------------------------------------------------

def abc_fixture():
    dets = [
        {"image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "score": 0.8},
        {"image_id": 1, "category_id": 1, "bbox": [1, 1, 10, 10], "score": 0.9},
        {"image_id": 1, "category_id": 1, "bbox": [100, 100, 10, 10], "score": 0.5},
    ]
    write_json("abc_detections.json", dets)


def ten_image_fixture():
    """Ten images, two classes, objects in all three area ranges; every object
    is detected (with varying localisation quality) and exactly three extra
    false positives are added."""
    rng = np.random.default_rng(7)
    anns, dets = [], []
    ann_id = 1
    sizes = [20, 28, 40, 64, 90, 120, 200]
    for img in range(1, 11):
        for k in range(1 + img % 3):
            w = float(sizes[(img + k) % len(sizes)])
            h = float(round(w * rng.uniform(0.7, 1.3)))
            x = float(round(rng.uniform(0, 400)))
            y = float(round(rng.uniform(0, 250)))
            cat = 1 + (img + k) % 2
            anns.append({"id": ann_id, "image_id": img, "category_id": cat,
                         "bbox": [x, y, w, h], "area": w * h, "iscrowd": 0})
            ann_id += 1
            shift = float(round(rng.uniform(0, 0.15) * w, 1))
            dets.append({"image_id": img, "category_id": cat, "bbox": [x + shift, y, w, h],
                         "score": round(float(rng.uniform(0.3, 0.99)), 3)})
    # three false positives: empty space, wrong class, badly localised
    dets.append({"image_id": 2, "category_id": 1, "bbox": [600, 400, 30, 30], "score": 0.95})
    dets.append({"image_id": 5, "category_id": 2, "bbox": [500, 10, 60, 60], "score": 0.42})
    first = anns[0]
    x, y, w, h = first["bbox"]
    dets.append({"image_id": first["image_id"], "category_id": first["category_id"],
                 "bbox": [x + 0.8 * w, y + 0.8 * h, w, h], "score": 0.61})
    gt = annotation_file(range(1, 11), anns, [1, 2])
    write_json("ten_image_gt.json", gt)
    write_json("ten_image_detections.json", dets)
    return gt, dets


def occlusion_fixture():
    """A well-localised detection T nested inside a higher-scoring, looser box H.
    Greedy NMS at IoU 0.5 keeps H and drops T; Confluence picks T (densest
    cluster) and drops H."""
    gt = annotation_file([1], [{"id": 1, "image_id": 1, "category_id": 1,
                                "bbox": [10, 10, 80, 80], "area": 6400.0, "iscrowd": 0}], [1])
    boxes = [
        ([0, 0, 100, 100], 0.9),    # H: loose, highest score
        ([10, 10, 80, 80], 0.8),    # T: exact
        ([11, 10, 80, 80], 0.7),    # jittered copies of T
        ([9, 11, 80, 80], 0.68),
        ([10, 9, 81, 80], 0.66),
        ([10, 10, 79, 81], 0.64),
    ]
    dets = [{"image_id": 1, "category_id": 1, "bbox": b, "score": s} for b, s in boxes]
    write_json("occlusion_gt.json", gt)
    write_json("occlusion_detections.json", dets)
    greedy_kept = [dets[0]]   # everything else has IoU > 0.5 with H
    confluence_kept = [dets[1]]
    assert to_records(confluence_hard(from_records(dets), 0.7)) == [
        {**dets[1], "bbox": [10, 10, 80, 80]}]
    return gt, dets, greedy_kept, confluence_kept


def crowd_fixture():
    """Single-class crowd scenes: rows of overlapping pedestrians, each
    reported several times with jitter, plus a few spurious boxes."""
    rng = np.random.default_rng(11)
    anns, dets = [], []
    ann_id = 1
    for img in range(1, 7):
        n_people = 4 + img % 3
        x = 10.0
        for p in range(n_people):
            w = float(round(rng.uniform(30, 60)))
            h = float(round(w * rng.uniform(2.0, 2.6)))
            y = float(round(rng.uniform(20, 80)))
            anns.append({"id": ann_id, "image_id": img, "category_id": 1,
                         "bbox": [x, y, w, h], "area": w * h, "iscrowd": 0})
            ann_id += 1
            for k in range(int(rng.integers(2, 6))):
                j = rng.normal(0.0, 0.07, 4)
                bx = round(x + j[0] * w, 1)
                by = round(y + j[1] * h, 1)
                bw = round(max(5.0, w * (1 + j[2])), 1)
                bh = round(max(5.0, h * (1 + j[3])), 1)
                dets.append({"image_id": img, "category_id": 1, "bbox": [bx, by, bw, bh],
                             "score": round(float(rng.uniform(0.2, 0.99)), 3)})
            x += float(round(w * rng.uniform(0.45, 0.8)))  # heavy overlap with the next person
        for _ in range(2):
            dets.append({"image_id": img, "category_id": 1,
                         "bbox": [round(float(rng.uniform(0, 500)), 1), round(float(rng.uniform(250, 400)), 1),
                                  25.0, 60.0],
                         "score": round(float(rng.uniform(0.05, 0.5)), 3)})
    gt = annotation_file(range(1, 7), anns, [1])
    write_json("crowd_gt.json", gt)
    write_json("crowd_detections.json", dets)
    return gt, dets


def crowd_region_fixture():
    """Crowd annotations that absorb several detections, plus boxes near the
    area-range boundaries."""
    anns = [
        {"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, 200, 100], "area": 20000.0, "iscrowd": 1},
        {"id": 2, "image_id": 1, "category_id": 1, "bbox": [20, 20, 40, 40], "area": 1600.0, "iscrowd": 0},
        {"id": 3, "image_id": 1, "category_id": 1, "bbox": [300, 300, 32, 32], "area": 1024.0, "iscrowd": 0},
        {"id": 4, "image_id": 2, "category_id": 1, "bbox": [10, 10, 96, 96], "area": 9216.0, "iscrowd": 0},
        {"id": 5, "image_id": 2, "category_id": 2, "bbox": [0, 0, 50, 50], "area": 2500.0, "iscrowd": 1},
        {"id": 6, "image_id": 2, "category_id": 2, "bbox": [200, 200, 20, 20], "area": 400.0, "iscrowd": 0},
    ]
    dets = [
        {"image_id": 1, "category_id": 1, "bbox": [21, 20, 40, 40], "score": 0.9},
        {"image_id": 1, "category_id": 1, "bbox": [100, 10, 30, 60], "score": 0.85},
        {"image_id": 1, "category_id": 1, "bbox": [140, 30, 40, 50], "score": 0.8},
        {"image_id": 1, "category_id": 1, "bbox": [22, 22, 38, 38], "score": 0.75},
        {"image_id": 1, "category_id": 1, "bbox": [301, 300, 31, 32], "score": 0.6},
        {"image_id": 1, "category_id": 1, "bbox": [400, 10, 10, 10], "score": 0.3},
        {"image_id": 2, "category_id": 1, "bbox": [12, 10, 96, 96], "score": 0.7},
        {"image_id": 2, "category_id": 1, "bbox": [300, 10, 150, 150], "score": 0.65},
        {"image_id": 2, "category_id": 2, "bbox": [5, 5, 20, 20], "score": 0.9},
        {"image_id": 2, "category_id": 2, "bbox": [201, 200, 20, 20], "score": 0.5},
    ]
    gt = annotation_file([1, 2], anns, [1, 2])
    write_json("crowd_region_gt.json", gt)
    write_json("crowd_region_detections.json", dets)
    return gt, dets


def random_cases(count=60, seed=23):
    """Small random evaluation problems with frozen reference stats."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(count):
        n_img = int(rng.integers(1, 4))
        anns, dets = [], []
        for img in range(1, n_img + 1):
            for _ in range(int(rng.integers(0, 4))):
                w, h = float(rng.integers(8, 140)), float(rng.integers(8, 140))
                x, y = float(rng.integers(0, 200)), float(rng.integers(0, 200))
                anns.append({"id": len(anns) + 1, "image_id": img, "category_id": int(rng.integers(1, 3)),
                             "bbox": [x, y, w, h], "area": w * h, "iscrowd": int(rng.random() < 0.15)})
            for _ in range(int(rng.integers(0, 6))):
                if anns and rng.random() < 0.7:
                    x, y, w, h = anns[int(rng.integers(0, len(anns)))]["bbox"]
                    j = rng.normal(0, 0.12, 4)
                    box = [round(x + j[0] * w, 1), round(y + j[1] * h, 1),
                           round(max(2.0, w * (1 + j[2])), 1), round(max(2.0, h * (1 + j[3])), 1)]
                else:
                    box = [float(rng.integers(0, 250)), float(rng.integers(0, 250)),
                           float(rng.integers(4, 120)), float(rng.integers(4, 120))]
                dets.append({"image_id": img, "category_id": int(rng.integers(1, 3)), "bbox": box,
                             "score": round(float(rng.uniform(0.05, 1.0)), 2)})
        if not anns:
            continue
        gt = annotation_file(range(1, n_img + 1), anns, [1, 2])
        cases.append({"gt": gt, "detections": dets, "stats": coco_stats(gt, dets)})
    write_json("random_cases.json", cases)


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    abc_fixture()
    expected = {}

    gt, dets = ten_image_fixture()
    expected["ten_image"] = coco_stats(gt, dets)

    gt, dets, greedy_kept, confluence_kept = occlusion_fixture()
    expected["occlusion_greedy"] = coco_stats(gt, greedy_kept)
    expected["occlusion_confluence"] = coco_stats(gt, confluence_kept)

    gt, dets = crowd_fixture()
    expected["crowd_raw"] = coco_stats(gt, dets)
    grid = [round(0.1 * k, 1) for k in range(1, 16)]
    expected["crowd_confluence_sweep"] = [
        {"threshold": t, "AP": coco_stats(gt, suppress_per_group(dets, t))["AP"]} for t in grid]

    # [FP 0.9, TP 0.8] on one ground truth
    one_gt = annotation_file([1], [{"id": 1, "image_id": 1, "category_id": 1,
                                    "bbox": [0, 0, 10, 10], "area": 100.0, "iscrowd": 0}], [1])
    fp_tp = [{"image_id": 1, "category_id": 1, "bbox": [50, 50, 10, 10], "score": 0.9},
             {"image_id": 1, "category_id": 1, "bbox": [0, 0, 10, 10], "score": 0.8}]
    write_json("fp_tp_gt.json", one_gt)
    write_json("fp_tp_detections.json", fp_tp)
    expected["fp_tp"] = coco_stats(one_gt, fp_tp)

    gt, dets = crowd_region_fixture()
    expected["crowd_region"] = coco_stats(gt, dets)
    random_cases()

    write_json("expected_metrics.json", expected)


if __name__ == "__main__":
    main()
