"""Command-line pipeline driver.

Subcommands walk the pipeline stages over plain-file artifacts in the output
directory, so each stage can be rerun independently:

    unify   ->  labelspace.json, remap_<dataset>.json
    fuse    ->  unified_gt.json, fused_accepted.json, review_seed.json,
                fusion_report.{txt,json,csv,png}
    serve   ->  (runs the review API over review_queue.jsonl)
    apply   ->  applied.json, apply_report.json
    export  ->  unified_dataset.json (self-checked round trip)
    eval    ->  eval.{txt,json,csv,png}
    bench   ->  benchmark.{txt,json,csv,png}

Exit codes: 0 success, 2 configuration problems, 3 unreadable or malformed
inputs, 4 semantic errors (missing stage artifacts, reference or invariant
failures).

In multi-dataset runs a detection may reference its image as
``<dataset>/<image_id>``; unqualified ids are accepted while unambiguous.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import DetectorNoiseModel, InvalidParams, WorldParams, run_benchmark
from .config import (
    DATA_ROOT_ENV,
    ConfigError,
    DatasetSource,
    PipelineConfig,
    load_config,
)
from .core import (
    CategorySpec,
    Dataset,
    Detection,
    ImageKey,
    LabelFuseError,
    LabelSpace,
    UnifiedDataset,
    UnknownImage,
)
from .fuse import FusionReport, fuse_dataset
from .ingest import (
    IngestReport,
    ParseError,
    SchemaError,
    export_coco,
    parse_coco_dataset,
    parse_detections,
    parse_unified,
    parse_yolo_dataset,
    read_names,
)
from .metrics import evaluate
from .reporting import (
    format_benchmark_table,
    format_metrics_table,
    write_benchmark_report,
    write_fusion_report,
    write_metrics_report,
)
from .review.server import create_app, serve
from .review.store import ReviewStore, apply_decisions, item_from_dict, item_to_dict
from .unify import AliasMap, RemapTable, build_unified_space, parse_alias_map, remap_dataset, remap_detections

log = logging.getLogger("labelfuse")

DEFAULT_CONFIG = "labelfuse.ini"
LABELSPACE_FILE = "labelspace.json"
UNIFIED_GT_FILE = "unified_gt.json"
ACCEPTED_FILE = "fused_accepted.json"
REVIEW_SEED_FILE = "review_seed.json"
STORE_FILE = "review_queue.jsonl"
APPLIED_FILE = "applied.json"
APPLY_REPORT_FILE = "apply_report.json"
EXPORT_FILE = "unified_dataset.json"


class ArtifactMissing(LabelFuseError, RuntimeError):
    """A required output of an earlier pipeline stage does not exist."""


# -- small file helpers -------------------------------------------------------


def _read_text(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def _load_json_file(path: Path, what: str):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise ParseError(f"{what} {path}: malformed JSON: {e}") from e


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _require(path: Path, stage: str) -> Path:
    if not path.is_file():
        raise ArtifactMissing(f"{path} not found; run 'labelfuse {stage}' first")
    return path


# -- config and artifact access ----------------------------------------------


def _needs_config(args) -> PipelineConfig:
    return load_config(args.config or DEFAULT_CONFIG)


def _optional_config(args) -> PipelineConfig | None:
    if args.config:
        return load_config(args.config)
    default = Path(DEFAULT_CONFIG)
    return load_config(default) if default.is_file() else None


def _out_dir(args, cfg: PipelineConfig | None) -> Path:
    raw = args.output or (cfg.output if cfg else "out")
    out = Path(raw)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ingest_all(cfg: PipelineConfig) -> list[tuple[DatasetSource, Dataset, IngestReport]]:
    loaded = []
    for src in cfg.datasets:
        report = IngestReport()
        if src.format == "coco":
            ds = parse_coco_dataset(_read_text(cfg.resolve(src.path)), src.id, report)
        else:
            names = read_names(cfg.resolve(src.names))
            ds = parse_yolo_dataset(cfg.resolve(src.path), names, src.id, report)
        log.debug("ingested %s: %d images, %d annotations (%d dropped, %d clamped)",
                  src.id, len(ds.images), len(ds.annotations), report.dropped, report.clamped)
        loaded.append((src, ds, report))
    return loaded


def _alias_map(cfg: PipelineConfig) -> AliasMap:
    if cfg.aliases:
        return parse_alias_map(_read_text(cfg.resolve(cfg.aliases)))
    return AliasMap()


def _space_to_doc(space: LabelSpace) -> dict:
    return {
        "categories": [
            {"id": c.id, "name": c.canonical_name, "aliases": sorted(c.aliases)}
            for c in space.categories
        ]
    }


def _space_from_doc(doc: dict) -> LabelSpace:
    entries = sorted(doc["categories"], key=lambda c: c["id"])
    return LabelSpace(tuple(
        CategorySpec(c["id"], c["name"], frozenset(c.get("aliases", ())))
        for c in entries
    ))


def _read_labelspace(out: Path) -> LabelSpace:
    path = _require(out / LABELSPACE_FILE, "unify")
    return _space_from_doc(_load_json_file(path, "label space"))


def _remap_path(out: Path, dataset_id: str) -> Path:
    return out / f"remap_{dataset_id}.json"


def _read_remap(out: Path, dataset_id: str) -> RemapTable:
    path = _require(_remap_path(out, dataset_id), "unify")
    doc = _load_json_file(path, "remap table")
    return RemapTable(doc["dataset"], {int(k): v for k, v in doc["mapping"].items()})


def _resolve_image(ref: str, doc_index: dict[str, dict[str, ImageKey]]) -> ImageKey:
    """Map a detection's image reference to a parsed image key.

    Qualified refs look like '<dataset>/<raw id>'; bare refs are looked up in
    every dataset's document-id index and must be unambiguous.
    """
    if "/" in ref:
        ds, _, raw = ref.partition("/")
        if ds in doc_index:
            key = doc_index[ds].get(raw)
            if key is None:
                raise UnknownImage(f"no image {raw!r} in dataset {ds!r}")
            return key
    hits = [idx[ref] for idx in doc_index.values() if ref in idx]
    if not hits:
        raise UnknownImage(f"detection references unknown image {ref!r}")
    if len(hits) > 1:
        raise UnknownImage(
            f"image id {ref!r} exists in several datasets; qualify it as '<dataset>/<id>'"
        )
    return hits[0]


def _merged_base(out: Path) -> UnifiedDataset:
    """Ground truth plus accepted pseudo labels, from the fuse artifacts."""
    gt = parse_unified(_read_text(_require(out / UNIFIED_GT_FILE, "fuse")))
    accepted = parse_unified(_read_text(_require(out / ACCEPTED_FILE, "fuse")))
    return UnifiedDataset(
        label_space=gt.label_space,
        images=gt.images,
        annotations=tuple(gt.annotations) + tuple(accepted.annotations),
    )


def _open_store(args, out: Path, space: LabelSpace) -> ReviewStore:
    store_path = Path(args.store_path) if getattr(args, "store_path", None) else out / STORE_FILE
    store = ReviewStore(store_path, len(space))
    seed = out / REVIEW_SEED_FILE
    if seed.is_file():
        items = [item_from_dict(d) for d in _load_json_file(seed, "review seed")]
        added = store.enqueue(items)
        log.debug("enqueued %d new review items from %s", added, seed)
    return store


# -- subcommands ---------------------------------------------------------------


def cmd_unify(args) -> int:
    cfg = _needs_config(args)
    out = _out_dir(args, cfg)
    loaded = _ingest_all(cfg)
    space, tables = build_unified_space(
        [(src.id, ds.label_space) for src, ds, _ in loaded], _alias_map(cfg)
    )
    _write_json(out / LABELSPACE_FILE, _space_to_doc(space))
    for table in tables:
        _write_json(_remap_path(out, table.dataset_id),
                    {"dataset": table.dataset_id,
                     "mapping": {str(k): v for k, v in sorted(table.mapping.items())}})
    print(f"unified label space: {len(space)} categories "
          f"from {len(cfg.datasets)} datasets -> {out / LABELSPACE_FILE}")
    for name in space.names:
        log.debug("  %d %s", space.id_of(name), name)
    return 0


def cmd_fuse(args) -> int:
    cfg = _needs_config(args)
    out = _out_dir(args, cfg)
    space = _read_labelspace(out)
    tables = {d.id: _read_remap(out, d.id) for d in cfg.datasets}
    loaded = _ingest_all(cfg)
    spaces_by_id = {src.id: ds.label_space for src, ds, _ in loaded}
    doc_index = {src.id: report.image_doc_ids for src, _, report in loaded}

    per_dataset: dict[str, list[Detection]] = {src.id: [] for src, _, _ in loaded}
    for det_src in cfg.detections:
        local = parse_detections(
            _read_text(cfg.resolve(det_src.path)),
            det_src.model_id,
            spaces_by_id[det_src.space_of],
        )
        for det in remap_detections(local, tables[det_src.space_of]):
            key = _resolve_image(det.image_id, doc_index)
            per_dataset[key.dataset].append(Detection(
                key.image_id, det.category_id, det.bbox, det.score, det.model_id,
            ))

    accepted = []
    review = []
    master = FusionReport("unified")
    all_images = []
    gt_annotations = []
    for src, ds, _ in loaded:
        remapped = remap_dataset(ds, tables[src.id], space)
        all_images.extend(remapped.images)
        gt_annotations.extend(remapped.annotations)
        result = fuse_dataset(
            remapped,
            per_dataset[src.id],
            cfg.fusion,
            native_category_ids=tables[src.id].native_unified_ids,
        )
        accepted.extend(result.accepted)
        review.extend(result.review)
        master.merge(result.report)

    unified_gt = UnifiedDataset(space, tuple(all_images), tuple(gt_annotations))
    (out / UNIFIED_GT_FILE).write_text(export_coco(unified_gt), encoding="utf-8")
    accepted_doc = UnifiedDataset(space, tuple(all_images), tuple(accepted))
    (out / ACCEPTED_FILE).write_text(export_coco(accepted_doc), encoding="utf-8")
    _write_json(out / REVIEW_SEED_FILE, [item_to_dict(i) for i in review])
    write_fusion_report(master, out)

    routes = ", ".join(f"{k}={v}" for k, v in master.routes.items())
    print(f"fused {master.detections} detections into {master.clusters} clusters ({routes})")
    print(f"accepted pseudo labels: {len(accepted)} -> {out / ACCEPTED_FILE}")
    print(f"review queue seed: {len(review)} -> {out / REVIEW_SEED_FILE}")
    return 0


def cmd_serve(args) -> int:
    cfg = _needs_config(args)
    out = _out_dir(args, cfg)
    space = _read_labelspace(out)
    store = _open_store(args, out, space)
    data_root = args.data_root or cfg.data_root
    routes = None
    report_path = out / "fusion_report.json"
    if report_path.is_file():
        routes = _load_json_file(report_path, "fusion report").get("routes")
    app = create_app(store, space, data_root, routes=routes, ui_dir=args.ui_dir)
    pending = store.status_counts()["pending"]
    print(f"review service: {pending} pending items, listening on {args.listen}")
    serve(app, args.listen)
    return 0


def cmd_apply(args) -> int:
    cfg = _needs_config(args)
    out = _out_dir(args, cfg)
    space = _read_labelspace(out)
    base = _merged_base(out)
    store = _open_store(args, out, space)
    merged, report = apply_decisions(base, store)
    (out / APPLIED_FILE).write_text(export_coco(merged), encoding="utf-8")
    _write_json(out / APPLY_REPORT_FILE, report.to_dict())
    print(f"applied {report.applied} decisions "
          f"(accepted {report.accepted}, relabeled {report.relabeled}, adjusted {report.adjusted}; "
          f"rejected {report.rejected}, pending {report.pending}, duplicates {report.duplicates})")
    print(f"wrote {out / APPLIED_FILE}")
    return 0


def cmd_export(args) -> int:
    cfg = _needs_config(args)
    out = _out_dir(args, cfg)
    applied = out / APPLIED_FILE
    if applied.is_file():
        text = _read_text(applied)
    else:
        text = export_coco(_merged_base(out))
    u = parse_unified(text)
    if export_coco(u) != text:
        raise LabelFuseError("export self-check failed: document does not round-trip")
    (out / EXPORT_FILE).write_text(text, encoding="utf-8")

    counts: dict[str, int] = {"gt": 0, "pseudo": 0, "verified": 0}
    for entry in json.loads(text)["annotations"]:
        counts[entry.get("source", "gt")] += 1
    print(f"exported {len(u.annotations)} annotations "
          f"(gt {counts['gt']}, pseudo {counts['pseudo']}, verified {counts['verified']}) "
          f"-> {out / EXPORT_FILE}")
    return 0


def cmd_eval(args) -> int:
    cfg = _optional_config(args)
    out = _out_dir(args, cfg)
    gt = parse_coco_dataset(_read_text(Path(args.gt)), "eval", honor_extensions=False)
    dets = parse_detections(_read_text(Path(args.detections)), "candidate", gt.label_space)
    thr = args.score_threshold
    if thr is None:
        thr = cfg.f1_score_threshold if cfg else 0.5
    report = evaluate(gt, dets, score_thr_f1=thr)
    paths = write_metrics_report(report, out, basename="eval")
    print(format_metrics_table(report), end="")
    print(f"wrote {paths['txt']}, {paths['json']}, {paths['csv']}, {paths['png']}")
    return 0


def cmd_bench(args) -> int:
    world = WorldParams(
        seed=args.seed,
        n_datasets=args.datasets,
        classes_per_dataset=args.classes_per_dataset,
        overlap_classes=args.overlap,
        images=args.images,
        boxes_per_image=args.boxes_per_image,
    )
    noise = DetectorNoiseModel(
        jitter_sigma=args.jitter_sigma,
        drop_rate=args.drop_rate,
        fp_rate=args.fp_rate,
    )
    report = run_benchmark(world, noise, reviewer=args.reviewer)
    out = _out_dir(args, _optional_config(args))
    paths = write_benchmark_report(report, out)
    print(format_benchmark_table(report), end="")
    print(f"wrote {paths['txt']}, {paths['json']}, {paths['csv']}, {paths['png']}")
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="labelfuse",
        description="Merge heterogeneous detection datasets, fuse external "
                    "predictions into pseudo labels, and review the doubtful ones.",
    )
    p.add_argument("--config", metavar="PATH",
                   help=f"pipeline config file (default: {DEFAULT_CONFIG})")
    p.add_argument("--output", metavar="DIR",
                   help="artifact directory (overrides the config's 'output')")
    p.add_argument("--verbose", action="store_true", help="enable debug logging")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sp = sub.add_parser("unify", help="build the unified label space and remap tables")
    sp.set_defaults(func=cmd_unify)

    sp = sub.add_parser("fuse", help="fuse detections into pseudo labels and a review queue")
    sp.set_defaults(func=cmd_fuse)

    sp = sub.add_parser("serve", help="run the review web service")
    sp.add_argument("--data-root", metavar="DIR",
                    help=f"directory image paths resolve against (default: {DATA_ROOT_ENV} or the config directory)")
    sp.add_argument("--store-path", metavar="PATH",
                    help=f"review store log (default: <output>/{STORE_FILE})")
    sp.add_argument("--listen", metavar="HOST:PORT", default="127.0.0.1:8765",
                    help="bind address (default: %(default)s)")
    sp.add_argument("--ui-dir", metavar="DIR",
                    help="static frontend assets to serve under /ui/")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("apply", help="fold review decisions into the unified dataset")
    sp.add_argument("--store-path", metavar="PATH",
                    help=f"review store log (default: <output>/{STORE_FILE})")
    sp.set_defaults(func=cmd_apply)

    sp = sub.add_parser("export", help="write the final unified dataset document")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("eval", help="score a detections file against a ground-truth document")
    sp.add_argument("gt", help="ground-truth annotation document")
    sp.add_argument("detections", help="detection-results document")
    sp.add_argument("--score-threshold", type=float, metavar="T",
                    help="score cutoff for precision/recall/F1 (default: 0.5)")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bench", help="run the synthetic fusion benchmark")
    sp.add_argument("--seed", type=int, default=7, help="base seed (default: %(default)s)")
    sp.add_argument("--datasets", type=int, default=3, metavar="N",
                    help="number of synthetic datasets (default: %(default)s)")
    sp.add_argument("--classes-per-dataset", type=int, default=4, metavar="K",
                    help="label-space size per dataset (default: %(default)s)")
    sp.add_argument("--overlap", type=int, default=2, metavar="K",
                    help="classes shared between neighbouring datasets (default: %(default)s)")
    sp.add_argument("--images", type=int, default=200, metavar="N",
                    help="total images (default: %(default)s)")
    sp.add_argument("--boxes-per-image", type=int, default=6, metavar="N",
                    help="ground-truth boxes per image (default: %(default)s)")
    sp.add_argument("--jitter-sigma", type=float, default=0.08, metavar="S",
                    help="box jitter as a fraction of box size (default: %(default)s)")
    sp.add_argument("--drop-rate", type=float, default=0.2, metavar="P",
                    help="probability a true box is missed (default: %(default)s)")
    sp.add_argument("--fp-rate", type=float, default=0.5, metavar="R",
                    help="expected false positives per image (default: %(default)s)")
    sp.add_argument("--reviewer", choices=("none", "oracle"), default="oracle",
                    help="simulated review stage (default: %(default)s)")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        log.error("configuration: %s", e)
        return 2
    except InvalidParams as e:
        log.error("bad parameters: %s", e)
        return 2
    except (ParseError, SchemaError) as e:
        log.error("cannot parse input: %s", e)
        return 3
    except LabelFuseError as e:
        log.error("%s", e)
        return 4
    except OSError as e:
        log.error("i/o: %s", e)
        return 3


if __name__ == "__main__":
    sys.exit(main())
