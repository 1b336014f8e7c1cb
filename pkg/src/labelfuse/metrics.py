"""COCO-protocol detection metrics: per-class P/R/F1, AP50 and AP50-95.

Matching is the standard greedy protocol (detections by descending score,
each taking the unmatched ground-truth box with highest IoU above the
threshold), AP uses 101-point interpolation over the monotone precision
envelope, and AP50-95 averages AP over IoU 0.50..0.95 in steps of 0.05.
Precision/recall/F1 are computed at IoU 0.5 over detections at or above a
fixed score threshold. Classes without ground truth are flagged and left out
of the aggregate means.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

from .core import (
    Annotation,
    Dataset,
    Detection,
    InvariantViolation,
    LabelFuseError,
    UnifiedDataset,
    UnknownImage,
)
from .fuse import iou

IOU_THRESHOLDS_50_95 = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
RECALL_GRID = tuple(i / 100.0 for i in range(101))


class EmptyDataset(LabelFuseError, ValueError):
    """The ground-truth dataset contains no images."""


@dataclass(frozen=True)
class DetMatch:
    """One detection's outcome, in score-descending evaluation order."""

    det_index: int
    score: float
    matched_gt: int | None
    is_tp: bool


@dataclass(frozen=True)
class MatchResult:
    matches: tuple[DetMatch, ...]
    gt_covered: tuple[bool, ...]


def match_detections(
    gt: Sequence[Annotation],
    dets: Sequence[Detection],
    iou_thr: float,
) -> MatchResult:
    """Greedy one-to-one matching of detections against ground truth.

    Detections are visited by descending score (ties keep input order); each
    claims the still-uncovered ground-truth box with highest IoU >= iou_thr,
    ties going to the lowest ground-truth index.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    covered = [False] * len(gt)
    matches = []
    for i in order:
        det = dets[i]
        best_j = None
        best_iou = 0.0
        for j, g in enumerate(gt):
            if covered[j]:
                continue
            overlap = iou(det.bbox, g.bbox)
            if overlap < iou_thr:
                continue
            if best_j is None or overlap > best_iou:
                best_j = j
                best_iou = overlap
        if best_j is not None:
            covered[best_j] = True
        matches.append(DetMatch(i, det.score, best_j, best_j is not None))
    return MatchResult(tuple(matches), tuple(covered))


@dataclass(frozen=True)
class PrCurve:
    """Cumulative (recall, precision) points swept by descending score."""

    points: tuple[tuple[float, float], ...]
    total_gt: int

    @property
    def zero_gt(self) -> bool:
        return self.total_gt == 0


def pr_curve(scored: Sequence[tuple[float, bool]], total_gt: int) -> PrCurve:
    """Build the PR points from (score, is_tp) pairs for one class.

    Pairs may come from many images; they are swept jointly by descending
    score (ties keep input order), one point per detection.
    """
    if total_gt < 0:
        raise InvariantViolation(f"total_gt must be >= 0, got {total_gt}")
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][0], i))
    tp = 0
    fp = 0
    points = []
    for i in order:
        if scored[i][1]:
            tp += 1
        else:
            fp += 1
        recall = tp / total_gt if total_gt > 0 else 0.0
        precision = tp / (tp + fp)
        points.append((recall, precision))
    return PrCurve(tuple(points), total_gt)


def average_precision(curve: PrCurve | Sequence[tuple[float, float]]) -> float:
    """101-point interpolated AP over the monotone precision envelope.

    AP = mean over r in {0, 0.01, ..., 1.00} of max{precision at recall >= r},
    where the max over an empty set is 0.
    """
    points = curve.points if isinstance(curve, PrCurve) else tuple(curve)
    if not points:
        return 0.0
    recalls = [r for r, _ in points]
    envelope = [0.0] * len(points)
    running = 0.0
    for i in range(len(points) - 1, -1, -1):
        running = max(running, points[i][1])
        envelope[i] = running
    total = 0.0
    for r in RECALL_GRID:
        idx = bisect_left(recalls, r)
        if idx < len(points):
            total += envelope[idx]
    return total / len(RECALL_GRID)


@dataclass(frozen=True)
class ClassMetrics:
    category_id: int
    name: str
    gt_count: int
    det_count: int
    precision: float
    recall: float
    f1: float
    ap50: float
    ap50_95: float
    zero_gt: bool = False


@dataclass(frozen=True)
class MetricsReport:
    """Per-class rows plus the unweighted 'all' aggregate over classes with GT."""

    classes: tuple[ClassMetrics, ...]
    aggregate: ClassMetrics
    score_thr_f1: float

    def to_dict(self) -> dict:
        def row(m: ClassMetrics) -> dict:
            return {
                "class": m.name,
                "category_id": m.category_id,
                "gt": m.gt_count,
                "detections": m.det_count,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "map50": m.ap50,
                "map50_95": m.ap50_95,
                "zero_gt": m.zero_gt,
            }

        return {
            "score_threshold_f1": self.score_thr_f1,
            "all": row(self.aggregate),
            "classes": [row(m) for m in self.classes],
        }


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate(gt: Dataset | UnifiedDataset, dets: Sequence[Detection],
             score_thr_f1: float = 0.5) -> MetricsReport:
    """Evaluate detections against a ground-truth dataset, per class.

    Detections must be in the dataset's label space and reference its image
    ids. AP50 matches at IoU 0.5; AP50-95 averages the ten COCO thresholds;
    precision/recall/F1 count only detections scoring at least
    ``score_thr_f1``, matched at IoU 0.5.
    """
    if not gt.images:
        raise EmptyDataset("ground-truth dataset has no images")
    ids = [img.id for img in gt.images]
    if len(set(ids)) != len(ids):
        raise UnknownImage("dataset has ambiguous bare image ids; cannot resolve detections")
    image_ids = set(ids)
    k = len(gt.label_space)
    for det in dets:
        if det.image_id not in image_ids:
            raise UnknownImage(f"detection references unknown image {det.image_id!r}")
        if det.category_id >= k:
            raise InvariantViolation(f"detection category {det.category_id} outside label space of size {k}")

    gt_by_img_cat: dict[tuple[str, int], list[Annotation]] = {}
    for a in gt.annotations:
        gt_by_img_cat.setdefault((a.image.image_id, a.category_id), []).append(a)
    det_by_img_cat: dict[tuple[str, int], list[Detection]] = {}
    for d in dets:
        det_by_img_cat.setdefault((d.image_id, d.category_id), []).append(d)

    rows = []
    for cat in gt.label_space.categories:
        image_pool = sorted(
            {img for (img, c) in gt_by_img_cat if c == cat.id}
            | {img for (img, c) in det_by_img_cat if c == cat.id}
        )
        total_gt = sum(len(gt_by_img_cat.get((img, cat.id), ())) for img in image_pool)
        total_det = sum(len(det_by_img_cat.get((img, cat.id), ())) for img in image_pool)

        aps = {}
        for thr in IOU_THRESHOLDS_50_95:
            scored: list[tuple[float, bool]] = []
            for img in image_pool:
                result = match_detections(
                    gt_by_img_cat.get((img, cat.id), ()),
                    det_by_img_cat.get((img, cat.id), ()),
                    thr,
                )
                scored.extend((m.score, m.is_tp) for m in result.matches)
            aps[thr] = average_precision(pr_curve(scored, total_gt))

        tp = 0
        kept = 0
        for img in image_pool:
            strong = [d for d in det_by_img_cat.get((img, cat.id), ()) if d.score >= score_thr_f1]
            kept += len(strong)
            result = match_detections(gt_by_img_cat.get((img, cat.id), ()), strong, 0.5)
            tp += sum(m.is_tp for m in result.matches)
        precision = tp / kept if kept > 0 else 0.0
        recall = tp / total_gt if total_gt > 0 else 0.0

        rows.append(
            ClassMetrics(
                category_id=cat.id,
                name=cat.canonical_name,
                gt_count=total_gt,
                det_count=total_det,
                precision=precision,
                recall=recall,
                f1=_f1(precision, recall),
                ap50=aps[0.5],
                ap50_95=sum(aps.values()) / len(aps),
                zero_gt=total_gt == 0,
            )
        )

    scored_rows = [r for r in rows if not r.zero_gt]
    n = len(scored_rows)
    aggregate = ClassMetrics(
        category_id=-1,
        name="all",
        gt_count=sum(r.gt_count for r in rows),
        det_count=sum(r.det_count for r in rows),
        precision=sum(r.precision for r in scored_rows) / n if n else 0.0,
        recall=sum(r.recall for r in scored_rows) / n if n else 0.0,
        f1=sum(r.f1 for r in scored_rows) / n if n else 0.0,
        ap50=sum(r.ap50 for r in scored_rows) / n if n else 0.0,
        ap50_95=sum(r.ap50_95 for r in scored_rows) / n if n else 0.0,
        zero_gt=n == 0,
    )
    return MetricsReport(tuple(rows), aggregate, score_thr_f1)
