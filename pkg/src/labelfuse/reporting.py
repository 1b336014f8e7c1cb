"""Render evaluation, fusion and benchmark reports to files.

Each writer emits the same report in four forms next to each other: an
aligned text table for terminals, a JSON twin for machines, a CSV for
spreadsheets, and a PNG bar chart. All writers return the written paths.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import BenchmarkReport
from .fuse import FusionReport, Route
from .metrics import ClassMetrics, MetricsReport

ROUTE_ORDER = tuple(r.value for r in Route)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _save_bars(path: Path, labels: list[str], series: dict[str, list[float]],
               title: str, ylabel: str) -> None:
    fig, ax = plt.subplots(figsize=(max(6.0, 1.0 + 0.9 * len(labels)), 4.0))
    width = 0.8 / max(1, len(series))
    for k, (name, values) in enumerate(series.items()):
        xs = [i + k * width for i in range(len(labels))]
        ax.bar(xs, values, width=width, label=name)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    # Fixed metadata keeps repeated runs byte-identical.
    fig.savefig(path, dpi=110, metadata={"Software": "labelfuse"})
    plt.close(fig)


# -- evaluation --------------------------------------------------------------


def format_metrics_table(report: MetricsReport) -> str:
    """Aligned table: Class | Precision | Recall | mAP50 | mAP50-95 | F1."""
    header = ("Class", "Precision", "Recall", "mAP50", "mAP50-95", "F1")

    def cells(m: ClassMetrics) -> tuple[str, ...]:
        name = m.name + ("*" if m.zero_gt else "")
        return (
            name,
            f"{m.precision:.3f}",
            f"{m.recall:.3f}",
            f"{m.ap50:.3f}",
            f"{m.ap50_95:.3f}",
            f"{m.f1:.3f}",
        )

    rows = [cells(report.aggregate)] + [cells(m) for m in report.classes]
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]

    def line(values: tuple[str, ...]) -> str:
        first = values[0].ljust(widths[0])
        rest = "  ".join(v.rjust(widths[i + 1]) for i, v in enumerate(values[1:]))
        return f"{first}  {rest}"

    out = [line(header), line(tuple("-" * w for w in widths))]
    out.extend(line(r) for r in rows)
    out.append("")
    out.append(f"score threshold for P/R/F1: {report.score_thr_f1}")
    if any(m.zero_gt for m in report.classes):
        out.append("* no ground-truth instances; excluded from the 'all' means")
    return "\n".join(out) + "\n"


def write_metrics_report(report: MetricsReport, out_dir: str | Path,
                         basename: str = "eval") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    txt = out / f"{basename}.txt"
    txt.write_text(format_metrics_table(report), encoding="utf-8")
    jsn = out / f"{basename}.json"
    _write_json(jsn, report.to_dict())

    csv_path = out / f"{basename}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "gt", "detections", "precision", "recall",
                    "f1", "map50", "map50_95", "zero_gt"])
        for m in (report.aggregate, *report.classes):
            w.writerow([m.name, m.gt_count, m.det_count,
                        f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}",
                        f"{m.ap50:.6f}", f"{m.ap50_95:.6f}", int(m.zero_gt)])

    png = out / f"{basename}.png"
    labels = [m.name for m in report.classes]
    _save_bars(
        png,
        labels,
        {
            "mAP50": [m.ap50 for m in report.classes],
            "mAP50-95": [m.ap50_95 for m in report.classes],
        },
        "Per-class average precision",
        "AP",
    )
    return {"txt": txt, "json": jsn, "csv": csv_path, "png": png}


# -- fusion ------------------------------------------------------------------


def format_fusion_table(report: FusionReport) -> str:
    lines = [
        f"fusion report for {report.dataset_id}",
        f"detections: {report.detections}",
        f"clusters:   {report.clusters}",
        "",
    ]
    width = max(len(r) for r in ROUTE_ORDER)
    for route in ROUTE_ORDER:
        lines.append(f"{route.ljust(width)}  {report.routes.get(route, 0)}")
    if report.per_class:
        lines.append("")
        lines.append("per category (id: " + ", ".join(ROUTE_ORDER) + ")")
        for cat in sorted(report.per_class):
            counts = report.per_class[cat]
            lines.append(
                f"  {cat}: " + ", ".join(str(counts.get(r, 0)) for r in ROUTE_ORDER)
            )
    return "\n".join(lines) + "\n"


def write_fusion_report(report: FusionReport, out_dir: str | Path,
                        basename: str = "fusion_report") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    txt = out / f"{basename}.txt"
    txt.write_text(format_fusion_table(report), encoding="utf-8")
    jsn = out / f"{basename}.json"
    _write_json(jsn, report.to_dict())

    csv_path = out / f"{basename}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["category_id", *ROUTE_ORDER])
        for cat in sorted(report.per_class):
            counts = report.per_class[cat]
            w.writerow([cat, *(counts.get(r, 0) for r in ROUTE_ORDER)])

    png = out / f"{basename}.png"
    _save_bars(
        png,
        list(ROUTE_ORDER),
        {"clusters": [report.routes.get(r, 0) for r in ROUTE_ORDER]},
        f"Routing of fused candidates ({report.dataset_id})",
        "clusters",
    )
    return {"txt": txt, "json": jsn, "csv": csv_path, "png": png}


# -- benchmark ---------------------------------------------------------------


def format_benchmark_table(report: BenchmarkReport) -> str:
    rows = [(row["model_id"], row["map50"]) for row in report.per_detector]
    rows.append(("fused", report.fused_map50))
    if report.reviewed_map50 is not None:
        rows.append(("fused+review", report.reviewed_map50))
    name_w = max(len("labels"), *(len(n) for n, _ in rows))
    lines = [
        f"synthetic benchmark, seed {report.seed}",
        (
            f"{report.world['n_datasets']} datasets, {report.world['total_classes']} classes, "
            f"{report.world['images']} images, {report.world['boxes_per_image']} boxes/image"
        ),
        (
            f"noise: jitter {report.noise['jitter_sigma']}, drop {report.noise['drop_rate']}, "
            f"fp {report.noise['fp_rate']}"
        ),
        "",
        f"{'labels'.ljust(name_w)}  mAP50",
        f"{'-' * name_w}  -----",
    ]
    lines.extend(f"{name.ljust(name_w)}  {value:.3f}" for name, value in rows)
    lines.append("")
    lines.append(f"fusion margin over best single detector: {report.fusion_margin:+.3f}")
    lines.append(f"runtime: {report.runtime_seconds:.1f}s")
    return "\n".join(lines) + "\n"


def write_benchmark_report(report: BenchmarkReport, out_dir: str | Path,
                           basename: str = "benchmark") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    txt = out / f"{basename}.txt"
    txt.write_text(format_benchmark_table(report), encoding="utf-8")
    jsn = out / f"{basename}.json"
    _write_json(jsn, report.to_dict())

    csv_path = out / f"{basename}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["labels", "map50"])
        for row in report.per_detector:
            w.writerow([row["model_id"], f"{row['map50']:.6f}"])
        w.writerow(["fused", f"{report.fused_map50:.6f}"])
        if report.reviewed_map50 is not None:
            w.writerow(["fused+review", f"{report.reviewed_map50:.6f}"])

    png = out / f"{basename}.png"
    labels = [row["model_id"] for row in report.per_detector] + ["fused"]
    values = [row["map50"] for row in report.per_detector] + [report.fused_map50]
    if report.reviewed_map50 is not None:
        labels.append("fused+review")
        values.append(report.reviewed_map50)
    _save_bars(png, labels, {"mAP50": values},
               "Pseudo-label quality: single detectors vs fusion", "mAP50")
    return {"txt": txt, "json": jsn, "csv": csv_path, "png": png}
