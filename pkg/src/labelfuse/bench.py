"""Seeded synthetic benchmark: does fusing detectors beat any single one?

Generates a hidden ground-truth world split across several partially
overlapping label spaces, simulates one noisy detector per dataset, then
compares mAP50 of (a) each detector's raw pseudo labels, (b) the fused
candidate set, and (c) fusion plus an oracle reviewer that accepts a flagged
candidate iff it overlaps a hidden-truth box of the same class at IoU >= 0.5.

Determinism: every random draw comes from a per-image generator seeded with
the tuple (base_seed, stream, image_index), where stream 0 is world
generation and stream 1+i is detector i. Parallel and serial runs therefore
agree draw-for-draw.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (
    Annotation,
    BoundingBox,
    Dataset,
    DegenerateBox,
    Detection,
    GroundTruth,
    ImageRecord,
    InvariantViolation,
    LabelFuseError,
    LabelSpace,
    Pseudo,
    UnifiedDataset,
    Verified,
    category_specs,
    clamp_box,
    confidence_of,
)
from .fuse import FusionConfig, FusionResult, fuse_dataset, iou
from .metrics import evaluate
from .review.items import ReviewItem
from .unify import build_unified_space, remap_dataset, remap_detections


class InvalidParams(LabelFuseError, ValueError):
    """Benchmark parameters outside their documented ranges."""


GRID_COLS = 4
GRID_ROWS = 3


@dataclass(frozen=True)
class WorldParams:
    """Shape of the synthetic multi-dataset world."""

    seed: int = 7
    n_datasets: int = 3
    classes_per_dataset: int = 4
    overlap_classes: int = 2
    images: int = 200
    boxes_per_image: int = 6
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.n_datasets < 1:
            raise InvalidParams("n_datasets must be >= 1")
        if self.classes_per_dataset < 1:
            raise InvalidParams("classes_per_dataset must be >= 1")
        if not 0 <= self.overlap_classes <= self.classes_per_dataset:
            raise InvalidParams("overlap_classes must be in [0, classes_per_dataset]")
        if self.images < 1:
            raise InvalidParams("images must be >= 1")
        if not 1 <= self.boxes_per_image <= GRID_COLS * GRID_ROWS:
            raise InvalidParams(f"boxes_per_image must be in [1, {GRID_COLS * GRID_ROWS}]")
        if self.width < 100 or self.height < 100:
            raise InvalidParams("image extent must be at least 100x100")

    @property
    def total_classes(self) -> int:
        stride = self.classes_per_dataset - self.overlap_classes
        if self.n_datasets == 1 or stride == 0:
            return self.classes_per_dataset
        return self.n_datasets * stride


@dataclass(frozen=True)
class DetectorNoiseModel:
    """Closed-form noise for a simulated detector.

    Per true box in the detector's label space: dropped with probability
    ``drop_rate``, otherwise emitted with coordinates jittered by
    N(0, jitter_sigma * extent) shifts and exp(N(0, jitter_sigma)) scale, and
    a score drawn uniform over ``tp_score``. Each image additionally gains
    Poisson(``fp_rate``) false positives with uniform class, uniform box, and
    a score drawn uniform over ``fp_score``.
    """

    jitter_sigma: float = 0.08
    drop_rate: float = 0.2
    fp_rate: float = 0.5
    tp_score: tuple[float, float] = (0.6, 1.0)
    fp_score: tuple[float, float] = (0.05, 0.5)

    def __post_init__(self):
        if self.jitter_sigma < 0:
            raise InvalidParams("jitter_sigma must be >= 0")
        if not 0 <= self.drop_rate < 1:
            raise InvalidParams("drop_rate must be in [0, 1)")
        if self.fp_rate < 0:
            raise InvalidParams("fp_rate must be >= 0")
        for lo, hi in (self.tp_score, self.fp_score):
            if not 0 <= lo <= hi <= 1:
                raise InvalidParams("score ranges must satisfy 0 <= lo <= hi <= 1")

    @classmethod
    def noiseless(cls) -> "DetectorNoiseModel":
        """Degenerate model: reproduces the truth exactly with score 1.0."""
        return cls(jitter_sigma=0.0, drop_rate=0.0, fp_rate=0.0,
                   tp_score=(1.0, 1.0), fp_score=(0.0, 0.0))


def _class_names(k: int) -> list[str]:
    return [f"class{i:02d}" for i in range(k)]


def _windows(params: WorldParams) -> list[list[int]]:
    """Global class ids visible to each dataset (cyclic windows)."""
    k = params.total_classes
    w = params.classes_per_dataset
    stride = w - params.overlap_classes
    if params.n_datasets == 1 or stride == 0:
        return [list(range(k)) for _ in range(params.n_datasets)]
    return [
        sorted((i * stride + j) % k for j in range(w))
        for i in range(params.n_datasets)
    ]


def _image_rng(seed: int, stream: int, img_idx: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, img_idx])


def generate_world(
    seed: int = 7,
    n_datasets: int = 3,
    classes_per_dataset: int = 4,
    overlap_classes: int = 2,
    images: int = 200,
    boxes_per_image: int = 6,
    width: int = 640,
    height: int = 480,
) -> tuple[UnifiedDataset, list[Dataset]]:
    """Build (hidden truth over all classes, visible per-dataset views).

    Images are assigned round-robin to datasets; each visible dataset keeps
    only its own images and only ground truth for its own class window.
    Boxes land in distinct grid cells so they never overlap.
    """
    params = WorldParams(seed, n_datasets, classes_per_dataset, overlap_classes,
                         images, boxes_per_image, width, height)
    k = params.total_classes
    names = _class_names(k)
    global_space = LabelSpace(category_specs(names))
    windows = _windows(params)

    cell_w = width / GRID_COLS
    cell_h = height / GRID_ROWS
    records = []
    truth_annotations = []
    for img_idx in range(images):
        owner = f"ds{img_idx % n_datasets}"
        image_id = f"img_{img_idx:06d}"
        record = ImageRecord(
            id=image_id,
            source_dataset=owner,
            file_path=f"images/{image_id}.jpg",
            width=width,
            height=height,
        )
        records.append(record)
        rng = _image_rng(seed, 0, img_idx)
        cells = rng.choice(GRID_COLS * GRID_ROWS, size=boxes_per_image, replace=False)
        for cell in cells:
            col = int(cell) % GRID_COLS
            row = int(cell) // GRID_COLS
            bw = float(rng.uniform(0.4, 0.85)) * cell_w
            bh = float(rng.uniform(0.4, 0.85)) * cell_h
            bx = col * cell_w + float(rng.uniform(0, cell_w - bw))
            by = row * cell_h + float(rng.uniform(0, cell_h - bh))
            category = int(rng.integers(0, k))
            truth_annotations.append(Annotation(
                image=record.key,
                category_id=category,
                bbox=BoundingBox(round(bx, 3), round(by, 3), round(bw, 3), round(bh, 3)),
                provenance=GroundTruth(),
            ))

    truth = UnifiedDataset(
        label_space=global_space,
        images=tuple(records),
        annotations=tuple(truth_annotations),
    )

    visibles = []
    for i in range(n_datasets):
        ds_id = f"ds{i}"
        window = windows[i]
        local_names = sorted(names[g] for g in window)
        local_space = LabelSpace(category_specs(local_names))
        to_local = {g: local_space.id_of(names[g]) for g in window}
        own_images = tuple(r for r in records if r.source_dataset == ds_id)
        own_keys = {r.key for r in own_images}
        anns = tuple(
            replace(a, category_id=to_local[a.category_id])
            for a in truth_annotations
            if a.image in own_keys and a.category_id in to_local
        )
        visibles.append(Dataset(id=ds_id, label_space=local_space,
                                images=own_images, annotations=anns))
    return truth, visibles


def simulate_detector(
    truth: Dataset | UnifiedDataset,
    noise: DetectorNoiseModel,
    model_space: LabelSpace,
    seed: int,
    stream: int = 1,
    model_id: str = "sim",
) -> list[Detection]:
    """Run one simulated detector over every truth image.

    Output category ids live in ``model_space``. ``stream`` selects the
    detector's independent random stream (see the module seed-splitting note).
    """
    truth_names = truth.label_space.names
    local_of = {}
    for gid, name in enumerate(truth_names):
        try:
            local_of[gid] = model_space.id_of(name)
        except KeyError:
            continue
    by_image: dict[str, list[Annotation]] = {}
    for a in truth.annotations:
        by_image.setdefault(a.image.image_id, []).append(a)

    detections = []
    for img_idx, record in enumerate(truth.images):
        rng = _image_rng(seed, stream, img_idx)
        for a in by_image.get(record.id, ()):
            local = local_of.get(a.category_id)
            if local is None:
                continue
            if float(rng.uniform(0.0, 1.0)) < noise.drop_rate:
                continue
            b = a.bbox
            s = noise.jitter_sigma
            bx = b.x + float(rng.normal(0.0, s * b.w)) if s > 0 else b.x
            by = b.y + float(rng.normal(0.0, s * b.h)) if s > 0 else b.y
            bw = b.w * float(np.exp(rng.normal(0.0, s))) if s > 0 else b.w
            bh = b.h * float(np.exp(rng.normal(0.0, s))) if s > 0 else b.h
            score = float(rng.uniform(noise.tp_score[0], noise.tp_score[1]))
            try:
                box = clamp_box(BoundingBox(bx, by, bw, bh), record)
            except DegenerateBox:
                continue
            detections.append(Detection(
                image_id=record.id,
                category_id=local,
                bbox=box,
                score=min(score, 1.0),
                model_id=model_id,
            ))
        n_fp = int(rng.poisson(noise.fp_rate))
        for _ in range(n_fp):
            fw = float(rng.uniform(0.04, 0.25)) * record.width
            fh = float(rng.uniform(0.04, 0.25)) * record.height
            fx = float(rng.uniform(0.0, record.width - fw))
            fy = float(rng.uniform(0.0, record.height - fh))
            category = int(rng.integers(0, len(model_space)))
            score = float(rng.uniform(noise.fp_score[0], noise.fp_score[1]))
            if score <= 0.0:
                continue
            detections.append(Detection(
                image_id=record.id,
                category_id=category,
                bbox=BoundingBox(fx, fy, fw, fh),
                score=score,
                model_id=model_id,
            ))
    return detections


def labels_to_detections(annotations: Sequence[Annotation]) -> list[Detection]:
    """View pseudo/verified annotations as scored detections for evaluation.

    A verified label keeps the confidence of the pseudo label it confirms:
    review changes which candidates survive, not how the detectors ranked
    them. With scores preserved, the reviewed label set is the unreviewed set
    minus rejected candidates, so reviewed mAP can never drop below
    unreviewed mAP.
    """
    out = []
    for a in annotations:
        prov = a.provenance
        if isinstance(prov, Pseudo):
            model = prov.model_id
            score = prov.confidence
        elif isinstance(prov, Verified):
            model = prov.original.model_id
            score = prov.original.confidence
        else:
            model = "gt"
            score = confidence_of(prov)
        out.append(Detection(
            image_id=a.image.image_id,
            category_id=a.category_id,
            bbox=a.bbox,
            score=score,
            model_id=model,
        ))
    return out


def oracle_review(
    items: Sequence[ReviewItem],
    truth: Dataset | UnifiedDataset,
) -> tuple[list[Annotation], int, int]:
    """Decide flagged candidates against hidden truth.

    Accepts a candidate iff some truth box of the same class on the same
    image overlaps it at IoU >= 0.5; everything else is rejected. Returns
    (verified annotations, accepted count, rejected count).
    """
    truth_by_image: dict[tuple[str, int], list[Annotation]] = {}
    for a in truth.annotations:
        truth_by_image.setdefault((a.image.image_id, a.category_id), []).append(a)
    verified = []
    accepted = 0
    rejected = 0
    for item in items:
        cand = item.candidate
        pool = truth_by_image.get((cand.image.image_id, cand.category_id), ())
        if any(iou(cand.bbox, t.bbox) >= 0.5 for t in pool):
            verified.append(Annotation(
                image=cand.image,
                category_id=cand.category_id,
                bbox=cand.bbox,
                provenance=Verified(reviewer="oracle", original=cand.provenance,
                                    action="accepted"),
            ))
            accepted += 1
        else:
            rejected += 1
    return verified, accepted, rejected


@dataclass
class BenchmarkReport:
    """mAP50 of single detectors vs fusion vs oracle-reviewed fusion."""

    seed: int
    world: dict
    noise: dict
    per_detector: list[dict] = field(default_factory=list)
    fused_map50: float = 0.0
    reviewed_map50: float | None = None
    review_enqueued: int = 0
    review_accepted: int = 0
    review_rejected: int = 0
    routes: dict = field(default_factory=dict)
    runtime_seconds: float = 0.0

    @property
    def best_single_map50(self) -> float:
        return max((row["map50"] for row in self.per_detector), default=0.0)

    @property
    def fusion_margin(self) -> float:
        return self.fused_map50 - self.best_single_map50

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "world": self.world,
            "noise": self.noise,
            "per_detector": self.per_detector,
            "best_single_map50": self.best_single_map50,
            "fused_map50": self.fused_map50,
            "fusion_margin": self.fusion_margin,
            "reviewed_map50": self.reviewed_map50,
            "review": {
                "enqueued": self.review_enqueued,
                "accepted": self.review_accepted,
                "rejected": self.review_rejected,
            },
            "routes": self.routes,
            "runtime_seconds": self.runtime_seconds,
        }


def default_fusion_config() -> FusionConfig:
    """Benchmark fusion keeps candidates on natively-labeled classes.

    Ground-truth suppression exists for production merging, where native
    classes already carry human labels. The benchmark instead scores the
    pseudo labels themselves on every class, so suppression is off.
    """
    return FusionConfig(suppress_gt_classes=False)


def run_benchmark(
    world: WorldParams = WorldParams(),
    noise: DetectorNoiseModel = DetectorNoiseModel(),
    fusion: FusionConfig | None = None,
    reviewer: str = "oracle",
) -> BenchmarkReport:
    """Generate, simulate, fuse, optionally oracle-review, and score."""
    if reviewer not in ("none", "oracle"):
        raise InvalidParams(f"reviewer must be 'none' or 'oracle', got {reviewer!r}")
    cfg = fusion if fusion is not None else default_fusion_config()
    started = time.perf_counter()

    truth, visibles = generate_world(
        seed=world.seed,
        n_datasets=world.n_datasets,
        classes_per_dataset=world.classes_per_dataset,
        overlap_classes=world.overlap_classes,
        images=world.images,
        boxes_per_image=world.boxes_per_image,
        width=world.width,
        height=world.height,
    )
    unified_space, tables = build_unified_space([(d.id, d.label_space) for d in visibles])
    if unified_space.names != truth.label_space.names:
        raise InvariantViolation("unified space does not match the generated truth space")

    remapped = [remap_dataset(d, t, unified_space) for d, t in zip(visibles, tables)]
    target = Dataset(
        id="unified",
        label_space=unified_space,
        images=tuple(r for d in remapped for r in d.images),
        annotations=tuple(a for d in remapped for a in d.annotations),
    )

    report = BenchmarkReport(
        seed=world.seed,
        world={
            "n_datasets": world.n_datasets,
            "classes_per_dataset": world.classes_per_dataset,
            "overlap_classes": world.overlap_classes,
            "total_classes": world.total_classes,
            "images": world.images,
            "boxes_per_image": world.boxes_per_image,
        },
        noise={
            "jitter_sigma": noise.jitter_sigma,
            "drop_rate": noise.drop_rate,
            "fp_rate": noise.fp_rate,
        },
    )

    all_detections = []
    for i, (visible, table) in enumerate(zip(visibles, tables)):
        local = simulate_detector(truth, noise, visible.label_space,
                                  world.seed, stream=1 + i, model_id=f"det{i}")
        dets = remap_detections(local, table)
        all_detections.extend(dets)
        single = evaluate(truth, dets)
        report.per_detector.append({
            "model_id": f"det{i}",
            "detections": len(dets),
            "map50": single.aggregate.ap50,
        })

    result: FusionResult = fuse_dataset(target, all_detections, cfg)
    fused_labels = list(result.accepted) + [item.candidate for item in result.review]
    report.fused_map50 = evaluate(truth, labels_to_detections(fused_labels)).aggregate.ap50
    report.routes = dict(result.report.routes)
    report.review_enqueued = len(result.review)

    if reviewer == "oracle":
        verified, n_acc, n_rej = oracle_review(result.review, truth)
        report.review_accepted = n_acc
        report.review_rejected = n_rej
        reviewed_labels = list(result.accepted) + verified
        report.reviewed_map50 = evaluate(
            truth, labels_to_detections(reviewed_labels)
        ).aggregate.ap50

    report.runtime_seconds = time.perf_counter() - started
    return report
