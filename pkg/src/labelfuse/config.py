"""Declarative pipeline configuration, parsed from an INI file.

One file names every input of a run so the whole pipeline is reproducible
from it. Layout:

    [pipeline]
    output = out/
    aliases = aliases.txt          ; optional
    f1_score_threshold = 0.5       ; optional

    [dataset:city]
    format = coco                  ; coco | yolo
    path = city/annotations.json   ; yolo: the dataset root directory
    names = city/names.txt         ; yolo only

    [detections:det_a]
    path = det_a.json
    space_of = city                ; label space the scores live in

    [fusion]                       ; optional, defaults below
    tau_accept = 0.7
    tau_discard = 0.05
    sigma_cluster = 0.55
    strategy = weighted_average    ; weighted_average | highest_score
    suppress_gt_classes = true

Relative input paths resolve against the data root (the LABELFUSE_DATA_ROOT
environment variable if set, else the config file's directory). A relative
``output`` resolves against the config file's directory so a run lands in
the same place no matter where the command was typed.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .core import LabelFuseError
from .fuse import FusionConfig, Strategy

DATA_ROOT_ENV = "LABELFUSE_DATA_ROOT"

DATASET_FORMATS = ("coco", "yolo")

_PIPELINE_KEYS = {"output", "aliases", "f1_score_threshold", "data_root"}
_DATASET_KEYS = {"format", "path", "names"}
_DETECTION_KEYS = {"path", "space_of"}
_FUSION_KEYS = {"tau_accept", "tau_discard", "sigma_cluster", "strategy", "suppress_gt_classes"}


class ConfigError(LabelFuseError, ValueError):
    """The configuration file is missing, malformed, or self-inconsistent."""


@dataclass(frozen=True)
class DatasetSource:
    id: str
    format: str
    path: str
    names: str | None = None


@dataclass(frozen=True)
class DetectionSource:
    model_id: str
    path: str
    space_of: str


@dataclass(frozen=True)
class PipelineConfig:
    datasets: tuple[DatasetSource, ...]
    detections: tuple[DetectionSource, ...]
    output: str
    aliases: str | None = None
    fusion: FusionConfig = field(default_factory=FusionConfig)
    f1_score_threshold: float = 0.5
    data_root: str = "."

    def dataset(self, dataset_id: str) -> DatasetSource:
        for d in self.datasets:
            if d.id == dataset_id:
                return d
        raise ConfigError(f"no dataset {dataset_id!r} declared")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.data_root) / p


def _check_keys(section: str, present, allowed: set[str]) -> None:
    unknown = set(present) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")


def _fusion_from(section: configparser.SectionProxy) -> FusionConfig:
    _check_keys(section.name, section.keys(), _FUSION_KEYS)
    kwargs = {}
    try:
        for key in ("tau_accept", "tau_discard", "sigma_cluster"):
            if key in section:
                kwargs[key] = section.getfloat(key)
        if "suppress_gt_classes" in section:
            kwargs["suppress_gt_classes"] = section.getboolean("suppress_gt_classes")
    except ValueError as e:
        raise ConfigError(f"bad numeric value in [fusion]: {e}") from e
    if "strategy" in section:
        raw = section.get("strategy").strip().lower()
        try:
            kwargs["strategy"] = Strategy(raw)
        except ValueError:
            choices = ", ".join(s.value for s in Strategy)
            raise ConfigError(f"unknown fusion strategy {raw!r}; expected one of: {choices}") from None
    try:
        return FusionConfig(**kwargs)
    except LabelFuseError as e:
        raise ConfigError(f"invalid [fusion] settings: {e}") from e


def load_config(path: str | os.PathLike, data_root: str | None = None) -> PipelineConfig:
    """Parse and validate the INI file at ``path``."""
    cfg_path = Path(path)
    if not cfg_path.is_file():
        raise ConfigError(f"config file not found: {cfg_path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(cfg_path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (configparser.Error, OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse {cfg_path}: {e}") from e

    pipeline = parser["pipeline"] if parser.has_section("pipeline") else {}
    if parser.has_section("pipeline"):
        _check_keys("pipeline", parser["pipeline"].keys(), _PIPELINE_KEYS)
    root = (
        data_root
        or os.environ.get(DATA_ROOT_ENV)
        or pipeline.get("data_root")
        or str(cfg_path.parent)
    )

    datasets = []
    detections = []
    fusion = FusionConfig()
    for name in parser.sections():
        if name == "pipeline":
            continue
        if name == "fusion":
            fusion = _fusion_from(parser[name])
            continue
        kind, _, ident = name.partition(":")
        if kind == "dataset":
            section = parser[name]
            _check_keys(name, section.keys(), _DATASET_KEYS)
            if not ident:
                raise ConfigError(f"dataset section needs an id: [{name}]")
            fmt = section.get("format", "").strip().lower()
            if fmt not in DATASET_FORMATS:
                raise ConfigError(
                    f"[{name}] format must be one of {DATASET_FORMATS}, got {fmt!r}"
                )
            if "path" not in section:
                raise ConfigError(f"[{name}] is missing 'path'")
            if fmt == "yolo" and "names" not in section:
                raise ConfigError(f"[{name}] format yolo requires 'names'")
            datasets.append(DatasetSource(
                id=ident, format=fmt, path=section.get("path"),
                names=section.get("names"),
            ))
        elif kind == "detections":
            section = parser[name]
            _check_keys(name, section.keys(), _DETECTION_KEYS)
            if not ident:
                raise ConfigError(f"detections section needs a model id: [{name}]")
            if "path" not in section or "space_of" not in section:
                raise ConfigError(f"[{name}] needs 'path' and 'space_of'")
            detections.append(DetectionSource(
                model_id=ident, path=section.get("path"),
                space_of=section.get("space_of"),
            ))
        else:
            raise ConfigError(f"unknown section [{name}]")

    if not datasets:
        raise ConfigError("config declares no [dataset:<id>] sections")
    ids = [d.id for d in datasets]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"dataset ids must be unique, got {ids}")
    model_ids = [d.model_id for d in detections]
    if len(set(model_ids)) != len(model_ids):
        raise ConfigError(f"detection model ids must be unique, got {model_ids}")
    known = set(ids)
    for det in detections:
        if det.space_of not in known:
            raise ConfigError(
                f"[detections:{det.model_id}] space_of references undeclared dataset {det.space_of!r}"
            )

    try:
        thr = float(pipeline.get("f1_score_threshold", 0.5))
    except ValueError as e:
        raise ConfigError(f"bad f1_score_threshold: {e}") from e
    if not 0.0 <= thr <= 1.0:
        raise ConfigError(f"f1_score_threshold must be in [0, 1], got {thr}")

    out_raw = pipeline.get("output", "out")
    out_path = Path(out_raw)
    if not out_path.is_absolute():
        out_path = cfg_path.parent / out_path

    return PipelineConfig(
        datasets=tuple(datasets),
        detections=tuple(detections),
        output=str(out_path),
        aliases=pipeline.get("aliases"),
        fusion=fusion,
        f1_score_threshold=thr,
        data_root=root,
    )
