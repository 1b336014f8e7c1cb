"""Turns foreign-model detections into pseudo-label candidates for one dataset.

Per image and per unified category the detections are greedily clustered by
IoU against cluster seeds, each cluster is fused into a single box, and the
fused candidate is routed by confidence: auto-accept, human review, discard,
or suppression when the target dataset already has authoritative ground
truth for that class. All tie-breaking is fixed, so identical inputs give
byte-identical outputs regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, NamedTuple, Sequence

from .core import (
    Annotation,
    BoundingBox,
    Dataset,
    DegenerateBox,
    Detection,
    GroundTruth,
    ImageRecord,
    InvariantViolation,
    Pseudo,
    UnknownImage,
    clamp_box,
)
from .review.items import ReviewItem


class Route(Enum):
    ACCEPTED = "accepted"
    NEEDS_REVIEW = "needs_review"
    DISCARDED = "discarded"
    SUPPRESSED_BY_GT = "suppressed_by_gt"


class Strategy(Enum):
    WEIGHTED_AVERAGE = "weighted_average"
    HIGHEST_SCORE = "highest_score"


@dataclass(frozen=True)
class FusionConfig:
    """Thresholds and knobs for clustering, fusing and routing candidates."""

    tau_accept: float = 0.7
    tau_discard: float = 0.05
    sigma_cluster: float = 0.55
    strategy: Strategy = Strategy.WEIGHTED_AVERAGE
    suppress_gt_classes: bool = True

    def __post_init__(self):
        if not (0.0 <= self.tau_discard < self.tau_accept <= 1.0):
            raise InvariantViolation(
                f"need 0 <= tau_discard < tau_accept <= 1, got {self.tau_discard}, {self.tau_accept}"
            )
        if not (0.0 < self.sigma_cluster < 1.0):
            raise InvariantViolation(f"sigma_cluster must be in (0,1), got {self.sigma_cluster}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 1 iff equal, 0 iff disjoint."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def cluster_detections(dets: Sequence[Detection], sigma: float) -> list[list[Detection]]:
    """Greedy seed clustering of same-image, same-category detections.

    Detections are visited by descending score (ties: model_id, then input
    order) and join the first cluster whose seed overlaps by at least sigma;
    otherwise they seed a new cluster. Clusters come back ordered by seed
    score descending.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].model_id, i))
    clusters: list[list[Detection]] = []
    for i in order:
        det = dets[i]
        for cluster in clusters:
            if iou(cluster[0].bbox, det.bbox) >= sigma:
                cluster.append(det)
                break
        else:
            clusters.append([det])
    return clusters


class FusedBox(NamedTuple):
    bbox: BoundingBox
    confidence: float
    contributing_models: frozenset[str]


def fuse_cluster(cluster: Sequence[Detection], strategy: Strategy) -> FusedBox:
    """Collapse one cluster into a single box with one confidence.

    WEIGHTED_AVERAGE takes the score-weighted mean of each coordinate and the
    arithmetic mean of the scores; HIGHEST_SCORE keeps the top-scoring member
    verbatim.
    """
    if not cluster:
        raise InvariantViolation("cannot fuse an empty cluster")
    models = frozenset(d.model_id for d in cluster)
    if strategy is Strategy.HIGHEST_SCORE or len(cluster) == 1:
        top = max(cluster, key=lambda d: d.score)
        return FusedBox(top.bbox, top.score, models)
    total = sum(d.score for d in cluster)
    if total == 0.0:
        # All-zero scores degrade to a plain mean.
        weights = [1.0 / len(cluster)] * len(cluster)
    else:
        weights = [d.score / total for d in cluster]
    x = sum(w * d.bbox.x for w, d in zip(weights, cluster))
    y = sum(w * d.bbox.y for w, d in zip(weights, cluster))
    w_ = sum(w * d.bbox.w for w, d in zip(weights, cluster))
    h = sum(w * d.bbox.h for w, d in zip(weights, cluster))
    confidence = sum(d.score for d in cluster) / len(cluster)
    return FusedBox(BoundingBox(x, y, w_, h), confidence, models)


def route_candidate(
    confidence: float,
    category_id: int,
    cfg: FusionConfig,
    native_category_ids: AbstractSet[int],
    gt_on_image: Sequence[Annotation] = (),
) -> Route:
    """Route one fused candidate by confidence and native-class membership.

    Evaluation order is fixed: discard below the floor, suppress classes the
    target already annotates (its ground truth is authoritative), auto-accept
    above the acceptance threshold, and flag the rest for human review.
    ``gt_on_image`` is the evidence the router saw, kept for reporting; the
    decision itself only needs class membership.
    """
    if confidence < cfg.tau_discard:
        return Route.DISCARDED
    if cfg.suppress_gt_classes and category_id in native_category_ids:
        return Route.SUPPRESSED_BY_GT
    if confidence >= cfg.tau_accept:
        return Route.ACCEPTED
    return Route.NEEDS_REVIEW


@dataclass
class FusionReport:
    """Cluster/route accounting for one fuse run."""

    dataset_id: str
    detections: int = 0
    clusters: int = 0
    routes: dict[str, int] = field(default_factory=lambda: {r.value: 0 for r in Route})
    per_class: dict[int, dict[str, int]] = field(default_factory=dict)

    def count(self, category_id: int, route: Route) -> None:
        self.clusters += 1
        self.routes[route.value] += 1
        per = self.per_class.setdefault(category_id, {r.value: 0 for r in Route})
        per[route.value] += 1

    def merge(self, other: "FusionReport") -> None:
        self.detections += other.detections
        self.clusters += other.clusters
        for k, v in other.routes.items():
            self.routes[k] += v
        for cat, counts in other.per_class.items():
            per = self.per_class.setdefault(cat, {r.value: 0 for r in Route})
            for k, v in counts.items():
                per[k] += v

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "detections": self.detections,
            "clusters": self.clusters,
            "routes": dict(self.routes),
            "per_class": {str(cat): dict(counts) for cat, counts in sorted(self.per_class.items())},
        }


class FusionResult(NamedTuple):
    accepted: list[Annotation]
    review: list[ReviewItem]
    report: FusionReport


def _fuse_image(
    target_id: str,
    image: ImageRecord,
    dets: Sequence[Detection],
    cfg: FusionConfig,
    native_category_ids: AbstractSet[int],
    gt_on_image: Sequence[Annotation],
) -> FusionResult:
    accepted: list[Annotation] = []
    review: list[ReviewItem] = []
    report = FusionReport(target_id, detections=len(dets))
    for category_id in sorted({d.category_id for d in dets}):
        cat_dets = [d for d in dets if d.category_id == category_id]
        review_seq = 0
        for cluster in cluster_detections(cat_dets, cfg.sigma_cluster):
            fused = fuse_cluster(cluster, cfg.strategy)
            route = route_candidate(fused.confidence, category_id, cfg, native_category_ids, gt_on_image)
            bbox = fused.bbox
            if route in (Route.ACCEPTED, Route.NEEDS_REVIEW):
                try:
                    bbox = clamp_box(fused.bbox, image)
                except DegenerateBox:
                    route = Route.DISCARDED
            report.count(category_id, route)
            if route is Route.DISCARDED or route is Route.SUPPRESSED_BY_GT:
                continue
            model_tag = "+".join(sorted(fused.contributing_models))
            candidate = Annotation(image.key, category_id, bbox, Pseudo(model_tag, fused.confidence))
            if route is Route.ACCEPTED:
                accepted.append(candidate)
            else:
                item_id = f"{target_id}:{image.id}:c{category_id}:{review_seq}"
                review_seq += 1
                review.append(ReviewItem(item_id=item_id, candidate=candidate, image=image))
    return FusionResult(accepted, review, report)


def fuse_dataset(
    target: Dataset,
    foreign_detections: Sequence[Detection],
    cfg: FusionConfig = FusionConfig(),
    native_category_ids: AbstractSet[int] | None = None,
    workers: int = 1,
) -> FusionResult:
    """Cluster, fuse and route all foreign detections against one dataset.

    ``target`` and the detections must already be remapped into the unified
    label space. ``native_category_ids`` is the set of unified ids the target
    natively annotates (the image of its remap table); when omitted it falls
    back to the classes present in the target's ground truth. Images are
    processed independently (optionally in ``workers`` threads) and merged in
    image-id order, so results do not depend on scheduling.
    """
    by_id: dict[str, ImageRecord] = {}
    for img in target.images:
        if img.id in by_id:
            raise UnknownImage(f"image id {img.id!r} is ambiguous in dataset {target.id!r}")
        by_id[img.id] = img
    k = len(target.label_space)
    for det in foreign_detections:
        if det.image_id not in by_id:
            raise UnknownImage(f"detection references unknown image {det.image_id!r}")
        if det.category_id >= k:
            raise InvariantViolation(f"detection category {det.category_id} outside unified space of size {k}")

    if native_category_ids is None:
        native_category_ids = frozenset(
            a.category_id for a in target.annotations if isinstance(a.provenance, GroundTruth)
        )

    dets_by_image: dict[str, list[Detection]] = {}
    for det in foreign_detections:
        dets_by_image.setdefault(det.image_id, []).append(det)
    gt_by_image: dict[str, list[Annotation]] = {}
    for a in target.annotations:
        gt_by_image.setdefault(a.image.image_id, []).append(a)

    image_ids = sorted(dets_by_image)

    def run(image_id: str) -> FusionResult:
        return _fuse_image(
            target.id,
            by_id[image_id],
            dets_by_image[image_id],
            cfg,
            native_category_ids,
            gt_by_image.get(image_id, ()),
        )

    if workers > 1 and len(image_ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run, image_ids))
    else:
        partials = [run(image_id) for image_id in image_ids]

    accepted: list[Annotation] = []
    review: list[ReviewItem] = []
    report = FusionReport(target.id)
    for part in partials:
        accepted.extend(part.accepted)
        review.extend(part.review)
        report.merge(part.report)
    return FusionResult(accepted, review, report)
