"""Parsers for annotation and prediction files, and the unified-dataset exporter.

Three inputs are understood:

* COCO-style annotation JSON (``images`` / ``annotations`` / ``categories``),
* YOLO directories (``labels/<stem>.txt`` + ``names.txt`` + ``sizes.tsv``),
* detection-result JSON arrays from external models.

Category ids are renumbered to dense ``0..k-1`` at parse time so downstream
code never deals with sparse ids. Boxes hanging over the image edge are
clamped; boxes fully outside are dropped and counted in the parse report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import (
    Annotation,
    BoundingBox,
    CategorySpec,
    Dataset,
    DegenerateBox,
    Detection,
    GroundTruth,
    ImageKey,
    ImageRecord,
    InvariantViolation,
    LabelFuseError,
    LabelSpace,
    Provenance,
    Pseudo,
    UnifiedDataset,
    Verified,
    clamp_box,
)


class ParseError(LabelFuseError, ValueError):
    """Input is not a well-formed document (bad syntax, wrong shapes)."""


class SchemaError(LabelFuseError, ValueError):
    """Document is syntactically fine but a required field is missing or invalid."""


class DanglingRef(LabelFuseError, ValueError):
    """An annotation references an image or category that does not exist."""


class IndexOutOfRange(LabelFuseError, ValueError):
    """A YOLO class index exceeds the provided names list."""


class MissingDimensions(LabelFuseError, ValueError):
    """No pixel size is available for a YOLO-labelled image."""


class ScoreOutOfRange(LabelFuseError, ValueError):
    """A detection score lies outside [0, 1]."""


class UnknownCategory(LabelFuseError, ValueError):
    """A detection names a category absent from the producing model's space."""


IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp", ".webp")


@dataclass
class IngestReport:
    """Counts of what a parse kept, fixed or dropped, plus the raw-id index."""

    clamped: int = 0
    dropped_outside: int = 0
    dropped_degenerate: int = 0
    # Raw document image id -> parsed image key, for resolving external
    # prediction files that reference the document's own ids.
    image_doc_ids: dict[str, ImageKey] = field(default_factory=dict)

    @property
    def dropped(self) -> int:
        return self.dropped_outside + self.dropped_degenerate


def _req(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return obj[key]


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    # json.loads admits NaN/Infinity literals; no coordinate, size, or score
    # can meaningfully be non-finite.
    if not math.isfinite(value):
        raise SchemaError(f"{where}: expected a finite number, got {value!r}")
    return float(value)


def _text(value, where: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{where}: expected text, got {value!r}")
    return value


def _bbox(value, where: str) -> BoundingBox | None:
    """Raw [x, y, w, h] to a box; None when the extent is non-positive."""
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise SchemaError(f"{where}: bbox must be [x, y, w, h], got {value!r}")
    x, y, w, h = (_num(v, where) for v in value)
    if w <= 0 or h <= 0:
        return None
    return BoundingBox(x, y, w, h)


def _load_json(document: str, what: str):
    try:
        return json.loads(document)
    except json.JSONDecodeError as e:
        raise ParseError(f"{what}: malformed document at line {e.lineno}, column {e.colno}: {e.msg}") from None


def _provenance(entry: dict, where: str) -> Provenance:
    source = entry.get("source", "gt")
    if source == "gt":
        return GroundTruth()
    if source not in ("pseudo", "verified"):
        raise SchemaError(f"{where}: unknown source {source!r}")
    model_id = _text(_req(entry, "model_id", where), where)
    confidence = _num(_req(entry, "confidence", where), where)
    try:
        pseudo = Pseudo(model_id, confidence)
        if source == "pseudo":
            return pseudo
        action = _text(_req(entry, "review_action", where), where)
        reviewer = _text(_req(entry, "reviewer", where), where)
        return Verified(reviewer=reviewer, original=pseudo, action=action)
    except InvariantViolation as e:
        raise SchemaError(f"{where}: {e}") from None


def parse_coco_dataset(
    document: str,
    dataset_id: str,
    report: IngestReport | None = None,
    honor_extensions: bool = True,
) -> Dataset:
    """Parse a COCO-style annotation document into a Dataset.

    Category ids are remapped to 0..k-1 preserving the order of the
    ``categories`` block. With ``honor_extensions`` the per-image
    ``source_dataset``/``source_id`` and per-annotation provenance extension
    fields written by :func:`export_coco` are applied, which makes
    export -> parse an exact round trip.
    """
    report = report if report is not None else IngestReport()
    doc = _load_json(document, "coco")
    if not isinstance(doc, dict):
        raise SchemaError("coco: top level must be an object")

    categories = _req(doc, "categories", "coco")
    images = _req(doc, "images", "coco")
    annotations = _req(doc, "annotations", "coco")
    for name, block in (("categories", categories), ("images", images), ("annotations", annotations)):
        if not isinstance(block, list):
            raise SchemaError(f"coco: {name!r} must be an array")

    cat_remap: dict[int, int] = {}
    specs = []
    for i, entry in enumerate(categories):
        where = f"categories[{i}]"
        raw_id = _req(entry, "id", where)
        if isinstance(raw_id, bool) or not isinstance(raw_id, int):
            raise SchemaError(f"{where}: id must be an integer, got {raw_id!r}")
        if raw_id in cat_remap:
            raise SchemaError(f"{where}: duplicate category id {raw_id}")
        name = _text(_req(entry, "name", where), where)
        aliases = entry.get("aliases", []) if honor_extensions else []
        if not isinstance(aliases, list):
            raise SchemaError(f"{where}: aliases must be an array")
        try:
            specs.append(CategorySpec(len(specs), name, frozenset(_text(a, where) for a in aliases)))
        except InvariantViolation as e:
            raise SchemaError(f"{where}: {e}") from None
        cat_remap[raw_id] = specs[-1].id
    try:
        space = LabelSpace(tuple(specs))
    except InvariantViolation as e:
        raise SchemaError(f"coco categories: {e}") from None

    records = []
    image_index: dict[str, ImageRecord] = {}
    for i, entry in enumerate(images):
        where = f"images[{i}]"
        raw_id = _req(entry, "id", where)
        if isinstance(raw_id, bool) or not isinstance(raw_id, (int, str)):
            raise SchemaError(f"{where}: id must be an integer or text, got {raw_id!r}")
        doc_id = str(raw_id)
        if doc_id in image_index:
            raise SchemaError(f"{where}: duplicate image id {doc_id}")
        width = _num(_req(entry, "width", where), where)
        height = _num(_req(entry, "height", where), where)
        if width != int(width) or height != int(height):
            raise SchemaError(f"{where}: width/height must be integers")
        file_name = _text(_req(entry, "file_name", where), where)
        source = dataset_id
        image_id = doc_id
        if honor_extensions:
            source = _text(entry.get("source_dataset", source), where)
            image_id = _text(entry.get("source_id", image_id), where) if "source_id" in entry else image_id
        try:
            record = ImageRecord(image_id, source, file_name, int(width), int(height))
        except InvariantViolation as e:
            raise SchemaError(f"{where}: {e}") from None
        records.append(record)
        image_index[doc_id] = record
        report.image_doc_ids[doc_id] = record.key

    keys = [r.key for r in records]
    if len(set(keys)) != len(keys):
        raise SchemaError("coco: duplicate image identity after applying extension fields")

    parsed = []
    for i, entry in enumerate(annotations):
        where = f"annotations[{i}]"
        raw_image = _req(entry, "image_id", where)
        if isinstance(raw_image, bool) or not isinstance(raw_image, (int, str)):
            raise SchemaError(f"{where}: image_id must be an integer or text")
        image = image_index.get(str(raw_image))
        if image is None:
            raise DanglingRef(f"{where}: unknown image id {raw_image!r}")
        raw_cat = _req(entry, "category_id", where)
        if isinstance(raw_cat, bool) or not isinstance(raw_cat, int):
            raise SchemaError(f"{where}: category_id must be an integer")
        if raw_cat not in cat_remap:
            raise DanglingRef(f"{where}: unknown category id {raw_cat}")
        box = _bbox(_req(entry, "bbox", where), where)
        if box is None:
            report.dropped_degenerate += 1
            continue
        try:
            clamped = clamp_box(box, image)
        except DegenerateBox:
            report.dropped_outside += 1
            continue
        if clamped != box:
            report.clamped += 1
        provenance = _provenance(entry, where) if honor_extensions else GroundTruth()
        parsed.append(Annotation(image.key, cat_remap[raw_cat], clamped, provenance))

    try:
        return Dataset(dataset_id, space, tuple(records), tuple(parsed))
    except InvariantViolation as e:
        raise SchemaError(f"coco: {e}") from None


def read_names(path: Path) -> list[str]:
    """Read a YOLO names file: one canonical class name per line."""
    names = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    return [n for n in names if n]


def _read_sizes(path: Path) -> dict[str, tuple[int, int]]:
    sizes: dict[str, tuple[int, int]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"{path.name}:{lineno}: expected '<stem>\\t<width>\\t<height>'")
        stem, w, h = parts
        try:
            sizes[stem] = (int(w), int(h))
        except ValueError:
            raise ParseError(f"{path.name}:{lineno}: width/height must be integers") from None
    return sizes


def _find_image_path(root: Path, stem: str) -> str:
    images_dir = root / "images"
    if images_dir.is_dir():
        for ext in IMAGE_EXTENSIONS:
            if (images_dir / (stem + ext)).exists():
                return f"images/{stem}{ext}"
    return f"images/{stem}.jpg"


def parse_yolo_dataset(
    root: Path | str,
    names: list[str],
    dataset_id: str,
    report: IngestReport | None = None,
) -> Dataset:
    """Parse a YOLO directory (labels/*.txt, sizes.tsv) into a Dataset.

    Label lines are ``class_idx cx cy w h`` with normalized center-format
    coordinates; pixel sizes come from the ``sizes.tsv`` sidecar so no image
    decoding happens here.
    """
    report = report if report is not None else IngestReport()
    root = Path(root)
    try:
        specs = tuple(CategorySpec(i, n) for i, n in enumerate(names))
        space = LabelSpace(specs)
    except InvariantViolation as e:
        raise SchemaError(f"names: {e}") from None

    sizes_path = root / "sizes.tsv"
    if not sizes_path.exists():
        raise MissingDimensions(f"no size index at {sizes_path}")
    sizes = _read_sizes(sizes_path)

    records = []
    for stem in sizes:
        w, h = sizes[stem]
        try:
            records.append(ImageRecord(stem, dataset_id, _find_image_path(root, stem), w, h))
        except InvariantViolation as e:
            raise ParseError(f"sizes.tsv: {stem}: {e}") from None
    by_stem = {r.id: r for r in records}
    for stem in sizes:
        report.image_doc_ids[stem] = by_stem[stem].key

    annotations = []
    labels_dir = root / "labels"
    label_files = sorted(labels_dir.glob("*.txt")) if labels_dir.is_dir() else []
    for label_path in label_files:
        stem = label_path.stem
        image = by_stem.get(stem)
        if image is None:
            raise MissingDimensions(f"{label_path.name}: no entry in sizes.tsv for {stem!r}")
        for lineno, line in enumerate(label_path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            where = f"{label_path.name}:{lineno}"
            parts = line.split()
            if len(parts) != 5:
                raise ParseError(f"{where}: expected 'class_idx cx cy w h'")
            try:
                class_idx = int(parts[0])
                cx, cy, w, h = (float(p) for p in parts[1:])
            except ValueError:
                raise ParseError(f"{where}: fields must be numeric") from None
            if class_idx < 0 or class_idx >= len(names):
                raise IndexOutOfRange(f"{where}: class index {class_idx} outside names list of length {len(names)}")
            if not all(0.0 <= v <= 1.0 for v in (cx, cy, w, h)):
                raise ParseError(f"{where}: coordinates must be normalized to [0,1]")
            if w <= 0 or h <= 0:
                report.dropped_degenerate += 1
                continue
            box = BoundingBox(
                (cx - w / 2.0) * image.width,
                (cy - h / 2.0) * image.height,
                w * image.width,
                h * image.height,
            )
            try:
                clamped = clamp_box(box, image)
            except DegenerateBox:
                report.dropped_outside += 1
                continue
            if clamped != box:
                report.clamped += 1
            annotations.append(Annotation(image.key, class_idx, clamped, GroundTruth()))

    return Dataset(dataset_id, space, tuple(records), tuple(annotations))


def parse_detections(document: str, model_id: str, model_space: LabelSpace) -> list[Detection]:
    """Parse a detection-results array into Detection values."""
    doc = _load_json(document, "detections")
    if not isinstance(doc, list):
        raise SchemaError("detections: top level must be an array")
    detections = []
    for i, entry in enumerate(doc):
        where = f"detections[{i}]"
        raw_image = _req(entry, "image_id", where)
        if isinstance(raw_image, bool) or not isinstance(raw_image, (int, str)):
            raise SchemaError(f"{where}: image_id must be an integer or text")
        raw_cat = _req(entry, "category_id", where)
        if isinstance(raw_cat, bool) or not isinstance(raw_cat, int):
            raise SchemaError(f"{where}: category_id must be an integer")
        if raw_cat < 0 or raw_cat >= len(model_space):
            raise UnknownCategory(f"{where}: category {raw_cat} not in model label space of size {len(model_space)}")
        score = _num(_req(entry, "score", where), where)
        if not 0.0 <= score <= 1.0:
            raise ScoreOutOfRange(f"{where}: score {score} outside [0,1]")
        box = _bbox(_req(entry, "bbox", where), where)
        if box is None:
            raise SchemaError(f"{where}: bbox extent must be positive")
        detections.append(Detection(str(raw_image), raw_cat, box, score, model_id))
    return detections


def _provenance_fields(provenance: Provenance) -> dict:
    if isinstance(provenance, GroundTruth):
        return {"source": "gt"}
    if isinstance(provenance, Pseudo):
        return {"source": "pseudo", "model_id": provenance.model_id, "confidence": provenance.confidence}
    return {
        "source": "verified",
        "model_id": provenance.original.model_id,
        "confidence": provenance.original.confidence,
        "review_action": provenance.action,
        "reviewer": provenance.reviewer,
    }


def export_coco(u: UnifiedDataset) -> str:
    """Serialize a unified dataset as a COCO-style document.

    Document image ids are renumbered 1..n; the original identity is kept in
    ``source_dataset``/``source_id`` extension fields, and provenance in the
    ``source``/``model_id``/``confidence``/``review_action``/``reviewer``
    fields, so :func:`parse_coco_dataset` reproduces the dataset exactly.
    """
    doc_cats = []
    for c in u.label_space.categories:
        entry = {"id": c.id, "name": c.canonical_name}
        if c.aliases:
            entry["aliases"] = sorted(c.aliases)
        doc_cats.append(entry)

    doc_ids: dict[ImageKey, int] = {}
    doc_images = []
    for n, img in enumerate(u.images, start=1):
        doc_ids[img.key] = n
        doc_images.append(
            {
                "id": n,
                "file_name": img.file_path,
                "width": img.width,
                "height": img.height,
                "source_dataset": img.source_dataset,
                "source_id": img.id,
            }
        )

    doc_annotations = []
    for n, a in enumerate(u.annotations, start=1):
        entry = {
            "id": n,
            "image_id": doc_ids[a.image],
            "category_id": a.category_id,
            # Coordinates are floats on the wire, so re-exporting a parsed
            # document reproduces it byte for byte.
            "bbox": [float(a.bbox.x), float(a.bbox.y), float(a.bbox.w), float(a.bbox.h)],
            "area": float(a.bbox.area),
            "iscrowd": 0,
        }
        entry.update(_provenance_fields(a.provenance))
        doc_annotations.append(entry)

    return json.dumps(
        {"images": doc_images, "annotations": doc_annotations, "categories": doc_cats},
        indent=2,
    )


def parse_unified(document: str) -> UnifiedDataset:
    """Parse an exported unified-dataset document back into a UnifiedDataset."""
    d = parse_coco_dataset(document, "unified")
    return UnifiedDataset(d.label_space, d.images, d.annotations)
