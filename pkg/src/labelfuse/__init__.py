"""labelfuse: merge detection datasets, fuse model predictions into pseudo
labels, route the doubtful ones to human review, and score the result.

The pipeline mirrors a weak-supervision labeling loop: unify N heterogeneous
label spaces into one, let external detectors populate every dataset with
candidate boxes, auto-accept the confident ones, queue the rest for review,
and export one unified dataset with full provenance per annotation.
"""

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
    Pseudo,
    UnifiedDataset,
    UnknownImage,
    Verified,
    category_specs,
    clamp_box,
    confidence_of,
)
from .fuse import FusionConfig, FusionReport, FusionResult, Route, Strategy, fuse_dataset, iou
from .metrics import MetricsReport, average_precision, evaluate, match_detections, pr_curve
from .unify import AliasMap, RemapTable, build_unified_space, parse_alias_map, remap_dataset, remap_detections

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "BoundingBox",
    "CategorySpec",
    "Dataset",
    "DegenerateBox",
    "Detection",
    "FusionConfig",
    "FusionReport",
    "FusionResult",
    "GroundTruth",
    "ImageKey",
    "ImageRecord",
    "InvariantViolation",
    "LabelFuseError",
    "LabelSpace",
    "MetricsReport",
    "Pseudo",
    "Route",
    "Strategy",
    "UnifiedDataset",
    "UnknownImage",
    "Verified",
    "AliasMap",
    "RemapTable",
    "average_precision",
    "build_unified_space",
    "category_specs",
    "clamp_box",
    "confidence_of",
    "evaluate",
    "fuse_dataset",
    "iou",
    "match_detections",
    "parse_alias_map",
    "pr_curve",
    "remap_dataset",
    "remap_detections",
]
