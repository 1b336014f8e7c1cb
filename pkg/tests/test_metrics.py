"""Detection metrics: greedy matching, PR curves, AP and the report."""

import random

import pytest

import oracles
from conftest import box, det, gt, image, space
from labelfuse.core import Dataset, InvariantViolation, UnknownImage
from labelfuse.metrics import (
    EmptyDataset,
    average_precision,
    evaluate,
    match_detections,
    pr_curve,
)


def dataset_from_rows(images, gt_rows, num_classes=3):
    recs = tuple(image(i, dataset="e", width=w, height=h) for i, (w, h) in sorted(images.items()))
    ds = Dataset(
        "e",
        space(*[f"k{c}" for c in range(num_classes)]),
        recs,
        tuple(gt(recs[[r.id for r in recs].index(img)], cat, box(*b)) for img, cat, b in gt_rows),
    )
    return ds


def random_instance(seed, n_images=4, num_classes=3, quantize=False):
    rng = random.Random(seed)
    images = {f"i{k}": (100, 100) for k in range(n_images)}
    gt_rows = []
    det_rows = []
    for img in images:
        for _ in range(rng.randint(0, 5)):
            b = (rng.uniform(0, 70), rng.uniform(0, 70), rng.uniform(4, 30), rng.uniform(4, 30))
            gt_rows.append((img, rng.randrange(num_classes), b))
    for img in images:
        for _ in range(rng.randint(0, 6)):
            if gt_rows and rng.random() < 0.6:
                src = rng.choice(gt_rows)[2]
                b = tuple(v + rng.uniform(-6, 6) for v in src[:2]) + tuple(
                    max(1.0, v + rng.uniform(-4, 4)) for v in src[2:]
                )
            else:
                b = (rng.uniform(0, 70), rng.uniform(0, 70), rng.uniform(4, 30), rng.uniform(4, 30))
            score = round(rng.random(), 1) if quantize else rng.random()
            det_rows.append((img, rng.randrange(num_classes), b, score))
    return images, gt_rows, det_rows


def to_detections(det_rows):
    return [det(img, cat, box(*b), score) for img, cat, b, score in det_rows]


class TestMatchDetections:
    IMG = image("i0", width=100, height=100)

    def test_duplicates_yield_one_tp(self):
        g = [gt(self.IMG, 0, box(10, 10, 20, 20))]
        d = [det("i0", 0, box(10, 10, 20, 20), 0.9),
             det("i0", 0, box(10, 10, 20, 20), 0.8)]
        result = match_detections(g, d, 0.5)
        assert [m.is_tp for m in result.matches] == [True, False]
        assert result.gt_covered == (True,)

    def test_highest_scoring_matches_first(self):
        g = [gt(self.IMG, 0, box(10, 10, 20, 20))]
        d = [det("i0", 0, box(11, 11, 20, 20), 0.3),
             det("i0", 0, box(12, 12, 20, 20), 0.9)]
        result = match_detections(g, d, 0.5)
        by_det = {m.det_index: m.is_tp for m in result.matches}
        assert by_det == {1: True, 0: False}
        assert [m.det_index for m in result.matches] == [1, 0]

    def test_score_tie_keeps_input_order(self):
        g = [gt(self.IMG, 0, box(10, 10, 20, 20))]
        d = [det("i0", 0, box(10, 10, 20, 20), 0.5),
             det("i0", 0, box(10, 10, 20, 20), 0.5)]
        result = match_detections(g, d, 0.5)
        assert [(m.det_index, m.is_tp) for m in result.matches] == [(0, True), (1, False)]

    def test_detection_takes_highest_iou_gt(self):
        g = [gt(self.IMG, 0, box(0, 0, 20, 20)), gt(self.IMG, 0, box(8, 0, 20, 20))]
        d = [det("i0", 0, box(7, 0, 20, 20), 0.9)]
        result = match_detections(g, d, 0.1)
        assert result.matches[0].matched_gt == 1

    def test_iou_tie_takes_lowest_gt_index(self):
        g = [gt(self.IMG, 0, box(0, 0, 20, 20)), gt(self.IMG, 0, box(0, 0, 20, 20))]
        d = [det("i0", 0, box(0, 0, 20, 20), 0.9)]
        result = match_detections(g, d, 0.5)
        assert result.matches[0].matched_gt == 0

    def test_below_threshold_is_fp(self):
        g = [gt(self.IMG, 0, box(0, 0, 20, 20))]
        d = [det("i0", 0, box(15, 15, 20, 20), 0.9)]
        result = match_detections(g, d, 0.5)
        assert not result.matches[0].is_tp
        assert result.gt_covered == (False,)


class TestPrCurveAndAp:
    def test_pr_points_hand_case(self):
        curve = pr_curve([(0.9, True), (0.8, False), (0.7, True)], total_gt=2)
        assert curve.points == ((0.5, 1.0), (0.5, 0.5), (1.0, 2 / 3))

    def test_pr_sweeps_by_score_not_input_order(self):
        curve = pr_curve([(0.1, False), (0.9, True)], total_gt=1)
        assert curve.points == ((1.0, 1.0), (1.0, 0.5))

    def test_negative_total_gt_rejected(self):
        with pytest.raises(InvariantViolation):
            pr_curve([], total_gt=-1)

    def test_zero_gt_curve(self):
        curve = pr_curve([(0.9, False)], total_gt=0)
        assert curve.zero_gt
        assert curve.points == ((0.0, 0.0),)

    def test_ap_of_perfect_head(self):
        # Precision stays 1.0 up to full recall, then a trailing FP.
        assert average_precision([(1.0, 1.0), (1.0, 0.5)]) == 1.0

    def test_ap_empty(self):
        assert average_precision([]) == 0.0

    def test_ap_half_recall(self):
        # One TP of two GT: precision 1.0 for r <= 0.5, nothing beyond.
        assert average_precision([(0.5, 1.0)]) == pytest.approx(51 / 101)

    def test_ap_uses_monotone_envelope(self):
        points = [(0.25, 1.0), (0.25, 0.5), (0.5, 2 / 3), (0.5, 0.5), (0.75, 0.6)]
        got = average_precision(points)
        grid = [i / 100 for i in range(101)]
        best = []
        for r in grid:
            cand = [p for rr, p in points if rr >= r]
            best.append(max(cand) if cand else 0.0)
        assert got == pytest.approx(sum(best) / 101)


class TestEvaluate:
    def test_perfect_detector_is_all_ones(self):
        images = {"i0": (100, 100), "i1": (80, 80)}
        gt_rows = [("i0", 0, (5, 5, 20, 20)), ("i0", 1, (40, 40, 20, 20)), ("i1", 0, (10, 10, 30, 30))]
        ds = dataset_from_rows(images, gt_rows, num_classes=2)
        dets = [det(img, cat, box(*b), 1.0) for img, cat, b in gt_rows]
        report = evaluate(ds, dets)
        for row in report.classes + (report.aggregate,):
            assert row.precision == 1.0
            assert row.recall == 1.0
            assert row.f1 == 1.0
            assert row.ap50 == 1.0
            assert row.ap50_95 == 1.0

    def test_no_detections_is_all_zeros(self):
        ds = dataset_from_rows({"i0": (100, 100)}, [("i0", 0, (5, 5, 20, 20))], num_classes=1)
        report = evaluate(ds, [])
        row = report.classes[0]
        assert (row.precision, row.recall, row.f1, row.ap50, row.ap50_95) == (0, 0, 0, 0, 0)
        assert row.gt_count == 1 and row.det_count == 0

    def test_zero_gt_class_flagged_and_excluded(self):
        ds = dataset_from_rows({"i0": (100, 100)}, [("i0", 0, (5, 5, 20, 20))], num_classes=2)
        dets = [det("i0", 0, box(5, 5, 20, 20), 1.0), det("i0", 1, box(50, 50, 10, 10), 1.0)]
        report = evaluate(ds, dets)
        assert not report.classes[0].zero_gt
        assert report.classes[1].zero_gt
        # The stray class does not drag the aggregate down.
        assert report.aggregate.ap50 == 1.0
        assert report.aggregate.det_count == 2

    def test_f1_threshold_filters_weak_detections(self):
        ds = dataset_from_rows({"i0": (100, 100)}, [("i0", 0, (5, 5, 20, 20))], num_classes=1)
        dets = [det("i0", 0, box(5, 5, 20, 20), 0.4), det("i0", 0, box(60, 60, 10, 10), 0.9)]
        report = evaluate(ds, dets, score_thr_f1=0.5)
        row = report.classes[0]
        # Only the strong FP survives the threshold: P=0, R=0.
        assert (row.precision, row.recall) == (0.0, 0.0)
        # AP still sees the weak TP after the strong FP.
        assert row.ap50 > 0.0
        assert row.det_count == 2

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyDataset):
            evaluate(Dataset("e", space("k0"), (), ()), [])

    def test_unknown_image_rejected(self):
        ds = dataset_from_rows({"i0": (100, 100)}, [], num_classes=1)
        with pytest.raises(UnknownImage):
            evaluate(ds, [det("ghost", 0, box(0, 0, 5, 5), 0.5)])

    def test_ambiguous_image_ids_rejected(self):
        imgs = (image("i0", dataset="a"), image("i0", dataset="b"))
        ds = Dataset("e", space("k0"), imgs, ())
        with pytest.raises(UnknownImage):
            evaluate(ds, [])

    def test_category_out_of_range_rejected(self):
        ds = dataset_from_rows({"i0": (100, 100)}, [], num_classes=1)
        with pytest.raises(InvariantViolation):
            evaluate(ds, [det("i0", 1, box(0, 0, 5, 5), 0.5)])

    def test_to_dict_shape(self):
        ds = dataset_from_rows({"i0": (100, 100)}, [("i0", 0, (5, 5, 20, 20))], num_classes=1)
        doc = evaluate(ds, []).to_dict()
        assert doc["all"]["class"] == "all"
        assert doc["classes"][0]["class"] == "k0"
        assert doc["score_threshold_f1"] == 0.5
        assert set(doc["classes"][0]) == {
            "class", "category_id", "gt", "detections", "precision", "recall",
            "f1", "map50", "map50_95", "zero_gt",
        }


class TestMetricInvariants:
    def test_ap_invariant_under_monotone_score_transform(self):
        for seed in range(8):
            images, gt_rows, det_rows = random_instance(seed)
            ds = dataset_from_rows(images, gt_rows)
            base = evaluate(ds, to_detections(det_rows))
            squashed = [(i, c, b, 0.25 + s / 2) for i, c, b, s in det_rows]
            other = evaluate(ds, to_detections(squashed))
            for a, b in zip(base.classes, other.classes):
                assert a.ap50 == pytest.approx(b.ap50, abs=1e-12)
                assert a.ap50_95 == pytest.approx(b.ap50_95, abs=1e-12)

    def test_ap50_95_never_exceeds_ap50(self):
        for seed in range(8):
            images, gt_rows, det_rows = random_instance(seed + 50)
            report = evaluate(dataset_from_rows(images, gt_rows), to_detections(det_rows))
            for row in report.classes:
                assert row.ap50_95 <= row.ap50 + 1e-12

    def test_extra_fp_never_raises_ap(self):
        images, gt_rows, det_rows = random_instance(3)
        ds = dataset_from_rows(images, gt_rows)
        base = evaluate(ds, to_detections(det_rows))
        worse_rows = det_rows + [("i0", c, (70.0, 70.0, 29.0, 29.0), 0.99) for c in range(3)]
        worse = evaluate(ds, to_detections(worse_rows))
        for a, b in zip(base.classes, worse.classes):
            if not a.zero_gt:
                assert b.ap50 <= a.ap50 + 1e-12

    def test_top_tp_never_lowers_ap(self):
        images, gt_rows, det_rows = random_instance(4)
        ds = dataset_from_rows(images, gt_rows)
        base = evaluate(ds, to_detections(det_rows))
        # A fresh ground-truth box per class, detected exactly at top score.
        extra_gt = [(f"i0", c, (1.0 + 31 * c, 1.0, 28.0, 28.0)) for c in range(3)]
        extra_det = [(img, c, b, 1.0) for img, c, b in extra_gt]
        better = evaluate(dataset_from_rows(images, gt_rows + extra_gt),
                          to_detections(det_rows + extra_det))
        for a, b in zip(base.classes, better.classes):
            if not a.zero_gt:
                assert b.ap50 >= a.ap50 - 1e-12


class TestAgainstOracle:
    @pytest.mark.parametrize("seed", range(12))
    @pytest.mark.parametrize("quantize", [False, True])
    def test_full_report_matches_reference(self, seed, quantize):
        images, gt_rows, det_rows = random_instance(seed, quantize=quantize)
        report = evaluate(dataset_from_rows(images, gt_rows), to_detections(det_rows))
        expected = oracles.evaluate_rows(gt_rows, det_rows, num_classes=3)
        rows = list(report.classes) + [report.aggregate]
        exp_rows = expected["classes"] + [expected["all"]]
        for got, want in zip(rows, exp_rows):
            assert got.gt_count == want["gt"]
            assert got.det_count == want["dets"]
            assert got.zero_gt == want["zero_gt"]
            for attr, key in (("precision", "precision"), ("recall", "recall"),
                              ("f1", "f1"), ("ap50", "ap50"), ("ap50_95", "ap50_95")):
                assert getattr(got, attr) == pytest.approx(want[key], abs=1e-12), (
                    f"{attr} mismatch for category {want['category_id']}"
                )
