"""Independent reference implementations used to cross-check the library.

Everything here is written straight from the documented protocols in plain
scalar Python: a unit-grid rasterization IoU, a brute-force detection
evaluator, and a straight-line re-implementation of the fusion routing
pipeline. Nothing imports from the package under test, so agreement between
the two is evidence of correctness rather than a shared bug.

Box convention throughout: (x, y, w, h) tuples, top-left corner plus extent.
"""

RECALL_GRID = [i / 100.0 for i in range(101)]
IOU_THRESHOLDS = [round(0.50 + 0.05 * k, 2) for k in range(10)]


def exact_iou(a, b):
    """Closed-form IoU of two (x, y, w, h) boxes."""
    ix = min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0])
    iy = min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1])
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a[2] * a[3] + b[2] * b[3] - inter)


def raster_iou(a, b):
    """IoU of two integer-coordinate boxes by counting unit grid cells.

    Deliberately brute force: every unit cell of the joint bounding region
    is classified against each box and the three counts are combined. Only
    valid for integer x, y, w, h.
    """
    x0 = min(a[0], b[0])
    y0 = min(a[1], b[1])
    x1 = max(a[0] + a[2], b[0] + b[2])
    y1 = max(a[1] + a[3], b[1] + b[3])
    in_a = in_b = in_both = 0
    for i in range(x0, x1):
        for j in range(y0, y1):
            pa = a[0] <= i and i + 1 <= a[0] + a[2] and a[1] <= j and j + 1 <= a[1] + a[3]
            pb = b[0] <= i and i + 1 <= b[0] + b[2] and b[1] <= j and j + 1 <= b[1] + b[3]
            in_a += pa
            in_b += pb
            in_both += pa and pb
    union = in_a + in_b - in_both
    return in_both / union if union else 0.0


def greedy_flags(gt_boxes, det_rows, iou_thr):
    """Greedy matching for one image and one class.

    ``det_rows`` is a list of (score, box) pairs. Detections are visited by
    descending score (ties by input position); each claims the still-open
    ground-truth box with the highest IoU at or above the threshold, lowest
    index on ties. Returns (score, is_tp) pairs in visit order.
    """
    order = sorted(range(len(det_rows)), key=lambda k: (-det_rows[k][0], k))
    taken = [False] * len(gt_boxes)
    out = []
    for k in order:
        score, box = det_rows[k]
        best = None
        best_iou = 0.0
        for j, g in enumerate(gt_boxes):
            if taken[j]:
                continue
            ov = exact_iou(box, g)
            if ov < iou_thr:
                continue
            if best is None or ov > best_iou:
                best = j
                best_iou = ov
        if best is not None:
            taken[best] = True
        out.append((score, best is not None))
    return out


def ap_101(pool, total_gt):
    """Direct 101-term interpolated average precision.

    ``pool`` is (score, is_tp) pairs; the sweep is by descending score with
    ties keeping pool order. For every grid recall r the summand is the
    maximum precision over all curve points with recall >= r (0 when there
    is none); no envelope precomputations, just scans.
    """
    order = sorted(range(len(pool)), key=lambda k: (-pool[k][0], k))
    points = []
    tp = fp = 0
    for k in order:
        if pool[k][1]:
            tp += 1
        else:
            fp += 1
        recall = tp / total_gt if total_gt > 0 else 0.0
        points.append((recall, tp / (tp + fp)))
    total = 0.0
    for r in RECALL_GRID:
        best = 0.0
        for recall, precision in points:
            if recall >= r and precision > best:
                best = precision
        total += best
    return total / len(RECALL_GRID)


def evaluate_rows(gt_rows, det_rows, num_classes, score_thr=0.5):
    """Brute-force scalar evaluator over plain tuples.

    ``gt_rows``: (image_id, category_id, box); ``det_rows``: (image_id,
    category_id, box, score). Returns {"classes": [row per class id],
    "all": aggregate row} with precision/recall/f1/ap50/ap50_95/gt/dets/
    zero_gt per row; the aggregate averages only classes with ground truth.
    """
    class_rows = []
    for cid in range(num_classes):
        cls_gt = [(g[0], g[2]) for g in gt_rows if g[1] == cid]
        cls_det = [(d[0], d[3], d[2]) for d in det_rows if d[1] == cid]
        images = sorted({g[0] for g in cls_gt} | {d[0] for d in cls_det})
        total_gt = len(cls_gt)

        aps = []
        for thr in IOU_THRESHOLDS:
            pool = []
            for img in images:
                g_boxes = [b for i, b in cls_gt if i == img]
                rows = [(s, b) for i, s, b in cls_det if i == img]
                pool.extend(greedy_flags(g_boxes, rows, thr))
            aps.append(ap_101(pool, total_gt))

        tp = 0
        kept = 0
        for img in images:
            g_boxes = [b for i, b in cls_gt if i == img]
            rows = [(s, b) for i, s, b in cls_det if i == img and s >= score_thr]
            kept += len(rows)
            tp += sum(1 for _, hit in greedy_flags(g_boxes, rows, 0.5) if hit)
        precision = tp / kept if kept > 0 else 0.0
        recall = tp / total_gt if total_gt > 0 else 0.0
        f1 = 0.0 if precision + recall == 0.0 else 2.0 * precision * recall / (precision + recall)

        class_rows.append({
            "category_id": cid,
            "gt": total_gt,
            "dets": len(cls_det),
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "ap50": aps[0],
            "ap50_95": sum(aps) / len(aps),
            "zero_gt": total_gt == 0,
        })

    scored = [r for r in class_rows if not r["zero_gt"]]
    n = len(scored)

    def mean(key):
        return sum(r[key] for r in scored) / n if n else 0.0

    aggregate = {
        "category_id": -1,
        "gt": sum(r["gt"] for r in class_rows),
        "dets": sum(r["dets"] for r in class_rows),
        "precision": mean("precision"),
        "recall": mean("recall"),
        "f1": mean("f1"),
        "ap50": mean("ap50"),
        "ap50_95": mean("ap50_95"),
        "zero_gt": n == 0,
    }
    return {"classes": class_rows, "all": aggregate}


def fuse_route_counts(images, det_rows, tau_accept, tau_discard, sigma_cluster,
                      suppress, native_ids):
    """Straight-line re-implementation of cluster, fuse and route counting.

    ``images`` maps image id -> (width, height). ``det_rows`` is a list of
    (image_id, category_id, box, score, model_id) in input order. Only the
    weighted-average strategy is modelled. Returns route name -> count.
    """
    counts = {"accepted": 0, "needs_review": 0, "discarded": 0, "suppressed_by_gt": 0}
    for image_id in sorted({d[0] for d in det_rows}):
        img_dets = [d for d in det_rows if d[0] == image_id]
        width, height = images[image_id]
        for cat in sorted({d[1] for d in img_dets}):
            rows = [d for d in img_dets if d[1] == cat]
            order = sorted(range(len(rows)), key=lambda k: (-rows[k][3], rows[k][4], k))
            clusters = []
            for k in order:
                box = rows[k][2]
                for cluster in clusters:
                    if exact_iou(cluster[0][2], box) >= sigma_cluster:
                        cluster.append(rows[k])
                        break
                else:
                    clusters.append([rows[k]])
            for cluster in clusters:
                scores = [r[3] for r in cluster]
                if len(cluster) == 1:
                    bx, by, bw, bh = cluster[0][2]
                    conf = scores[0]
                else:
                    total = sum(scores)
                    if total == 0.0:
                        weights = [1.0 / len(cluster)] * len(cluster)
                    else:
                        weights = [s / total for s in scores]
                    bx = sum(w * r[2][0] for w, r in zip(weights, cluster))
                    by = sum(w * r[2][1] for w, r in zip(weights, cluster))
                    bw = sum(w * r[2][2] for w, r in zip(weights, cluster))
                    bh = sum(w * r[2][3] for w, r in zip(weights, cluster))
                    conf = sum(scores) / len(cluster)
                if conf < tau_discard:
                    counts["discarded"] += 1
                    continue
                if suppress and cat in native_ids:
                    counts["suppressed_by_gt"] += 1
                    continue
                route = "accepted" if conf >= tau_accept else "needs_review"
                x1 = max(bx, 0.0)
                y1 = max(by, 0.0)
                x2 = min(bx + bw, float(width))
                y2 = min(by + bh, float(height))
                if x2 - x1 <= 0 or y2 - y1 <= 0:
                    counts["discarded"] += 1
                else:
                    counts[route] += 1
    return counts
