"""Shared builders for the test suite: tiny datasets, stores and workspaces."""

import json
from pathlib import Path

from PIL import Image

from labelfuse.core import (
    Annotation,
    BoundingBox,
    Dataset,
    Detection,
    GroundTruth,
    ImageRecord,
    LabelSpace,
    Pseudo,
    category_specs,
)
from labelfuse.review.items import ReviewItem


def space(*names, aliases=None):
    return LabelSpace(category_specs(list(names), aliases))


def image(image_id, dataset="d0", width=100, height=100, file_path=None):
    return ImageRecord(
        id=image_id,
        source_dataset=dataset,
        file_path=file_path or f"images/{image_id}.png",
        width=width,
        height=height,
    )


def box(x, y, w, h):
    return BoundingBox(x, y, w, h)


def gt(img, category_id, bbox):
    return Annotation(img.key, category_id, bbox, GroundTruth())


def pseudo(img, category_id, bbox, score, model="m0"):
    return Annotation(img.key, category_id, bbox, Pseudo(model, score))


def det(image_id, category_id, bbox, score, model="m0"):
    return Detection(image_id, category_id, bbox, score, model)


def pending_item(item_id, img, category_id=0, bbox=None, score=0.4, model="m0"):
    bbox = BoundingBox(*bbox) if bbox is not None else BoundingBox(10, 10, 20, 20)
    return ReviewItem(
        item_id=item_id,
        candidate=Annotation(img.key, category_id, bbox, Pseudo(model, score)),
        image=img,
    )


def write_png(path, width, height, rgb=(90, 120, 160)):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", (width, height), rgb).save(path)
    return path


def make_workspace(root: Path) -> dict:
    """Two small COCO datasets with real image files, detections and config.

    Dataset "city" annotates car/person over three 64x48 images (sparse
    source category ids); dataset "rural" annotates car/rider over two 80x60
    images with string document ids. Two detection files cross-pollinate the
    datasets so fusion produces accepted, review, suppressed and discarded
    candidates. Returns the important paths.
    """
    root = Path(root)
    for n, color in zip((1, 2, 3), ((200, 40, 40), (40, 200, 40), (40, 40, 200))):
        write_png(root / "city" / "images" / f"{n}.png", 64, 48, color)
    for stem, color in (("r1", (220, 220, 60)), ("r2", (60, 220, 220))):
        write_png(root / "rural" / "images" / f"{stem}.png", 80, 60, color)

    city = {
        "categories": [{"id": 10, "name": "car"}, {"id": 20, "name": "person"}],
        "images": [
            {"id": n, "file_name": f"city/images/{n}.png", "width": 64, "height": 48}
            for n in (1, 2, 3)
        ],
        "annotations": [
            {"id": 1, "image_id": 1, "category_id": 10, "bbox": [4, 4, 20, 12]},
            {"id": 2, "image_id": 1, "category_id": 20, "bbox": [30, 8, 10, 20]},
            {"id": 3, "image_id": 2, "category_id": 10, "bbox": [8, 10, 24, 16]},
            {"id": 4, "image_id": 3, "category_id": 20, "bbox": [2, 2, 12, 30]},
        ],
    }
    (root / "city" / "annotations.json").write_text(json.dumps(city, indent=2))

    rural = {
        "categories": [{"id": 1, "name": "car"}, {"id": 2, "name": "rider"}],
        "images": [
            {"id": "r1", "file_name": "rural/images/r1.png", "width": 80, "height": 60},
            {"id": "r2", "file_name": "rural/images/r2.png", "width": 80, "height": 60},
        ],
        "annotations": [
            {"id": 1, "image_id": "r1", "category_id": 1, "bbox": [5, 5, 30, 20]},
            {"id": 2, "image_id": "r1", "category_id": 2, "bbox": [40, 10, 16, 28]},
            {"id": 3, "image_id": "r2", "category_id": 2, "bbox": [10, 20, 20, 24]},
        ],
    }
    (root / "rural" / "annotations.json").write_text(json.dumps(rural, indent=2))

    # Model in the city label space (car=0, person=1), aimed at rural images.
    dets_mcar = [
        {"image_id": "r1", "category_id": 1, "bbox": [12, 6, 14, 26], "score": 0.92},
        {"image_id": "r1", "category_id": 1, "bbox": [12.5, 6.5, 14, 26], "score": 0.88},
        {"image_id": "r1", "category_id": 1, "bbox": [45, 30, 12, 14], "score": 0.5},
        {"image_id": "r2", "category_id": 1, "bbox": [30, 10, 12, 22], "score": 0.42},
        {"image_id": "r2", "category_id": 0, "bbox": [6, 6, 20, 14], "score": 0.95},
        {"image_id": "r2", "category_id": 1, "bbox": [50, 30, 10, 12], "score": 0.03},
        {"image_id": "city/2", "category_id": 1, "bbox": [40, 6, 12, 24], "score": 0.75},
    ]
    (root / "dets_mcar.json").write_text(json.dumps(dets_mcar, indent=2))

    # Model in the rural label space (car=0, rider=1), aimed at city images.
    dets_mrid = [
        {"image_id": "city/1", "category_id": 1, "bbox": [31, 8, 9, 21], "score": 0.85},
        {"image_id": "city/1", "category_id": 1, "bbox": [30.5, 8.2, 9.5, 20], "score": 0.8},
        {"image_id": "city/2", "category_id": 1, "bbox": [10, 10, 14, 20], "score": 0.5},
        {"image_id": "city/3", "category_id": 1, "bbox": [20, 14, 12, 18], "score": 0.45},
        {"image_id": "r2", "category_id": 1, "bbox": [11, 21, 19, 23], "score": 0.55},
    ]
    (root / "dets_mrid.json").write_text(json.dumps(dets_mrid, indent=2))

    config = "\n".join([
        "[pipeline]",
        "output = out",
        "",
        "[dataset:city]",
        "format = coco",
        "path = city/annotations.json",
        "",
        "[dataset:rural]",
        "format = coco",
        "path = rural/annotations.json",
        "",
        "[detections:mcar]",
        "path = dets_mcar.json",
        "space_of = city",
        "",
        "[detections:mrid]",
        "path = dets_mrid.json",
        "space_of = rural",
        "",
    ])
    (root / "labelfuse.ini").write_text(config)

    return {
        "root": root,
        "config": root / "labelfuse.ini",
        "out": root / "out",
        "gt_annotations": 7,
        "review_item_ids": [
            "city:2:c2:0",
            "city:3:c2:0",
            "rural:r1:c1:0",
            "rural:r2:c1:0",
        ],
        "accepted_pseudo": 2,
        "routes": {"accepted": 2, "needs_review": 4, "discarded": 1, "suppressed_by_gt": 3},
    }


def make_yolo_dataset(root: Path, names=("car", "sign")) -> Path:
    """A minimal YOLO directory: names, sizes, labels, one real image."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "names.txt").write_text("".join(n + "\n" for n in names))
    (root / "sizes.tsv").write_text("y1\t64\t48\ny2\t64\t48\n")
    labels = root / "labels"
    labels.mkdir(exist_ok=True)
    (labels / "y1.txt").write_text("0 0.5 0.5 0.25 0.5\n1 0.25 0.25 0.2 0.3\n")
    (labels / "y2.txt").write_text("1 0.75 0.5 0.3 0.4\n")
    write_png(root / "images" / "y1.png", 64, 48, (10, 10, 10))
    write_png(root / "images" / "y2.png", 64, 48, (20, 20, 20))
    return root
