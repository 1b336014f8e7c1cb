"""Tests for INI pipeline configuration parsing and path resolution."""

import textwrap
from pathlib import Path

import pytest

from labelfuse.config import (
    DATA_ROOT_ENV,
    ConfigError,
    DatasetSource,
    DetectionSource,
    PipelineConfig,
    load_config,
)
from labelfuse.core import LabelFuseError
from labelfuse.fuse import FusionConfig, Strategy

FULL = """
[pipeline]
output = results
aliases = aliases.txt
f1_score_threshold = 0.4
data_root = /data

[dataset:city]
format = coco
path = city/annotations.json

[dataset:drive]
format = yolo
path = drive
names = drive/names.txt

[detections:mcar]
path = mcar.json
space_of = city

[detections:mrid]
path = mrid.json
space_of = drive

[fusion]
tau_accept = 0.8
tau_discard = 0.1
sigma_cluster = 0.6
strategy = highest_score
suppress_gt_classes = false
"""

MINIMAL = """
[dataset:solo]
format = coco
path = anns.json
"""


def write_cfg(tmp_path, text, name="labelfuse.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return path


class TestHappyPath:
    def test_full_config(self, tmp_path, monkeypatch):
        monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
        cfg = load_config(write_cfg(tmp_path, FULL))
        assert cfg.datasets == (
            DatasetSource(id="city", format="coco", path="city/annotations.json"),
            DatasetSource(id="drive", format="yolo", path="drive",
                          names="drive/names.txt"),
        )
        assert cfg.detections == (
            DetectionSource(model_id="mcar", path="mcar.json", space_of="city"),
            DetectionSource(model_id="mrid", path="mrid.json", space_of="drive"),
        )
        assert cfg.output == str(tmp_path / "results")
        assert cfg.aliases == "aliases.txt"
        assert cfg.f1_score_threshold == 0.4
        assert cfg.data_root == "/data"
        assert cfg.fusion == FusionConfig(tau_accept=0.8, tau_discard=0.1,
                                          sigma_cluster=0.6,
                                          strategy=Strategy.HIGHEST_SCORE,
                                          suppress_gt_classes=False)

    def test_minimal_config_defaults(self, tmp_path, monkeypatch):
        monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
        cfg = load_config(write_cfg(tmp_path, MINIMAL))
        assert len(cfg.datasets) == 1
        assert cfg.detections == ()
        assert cfg.output == str(tmp_path / "out")
        assert cfg.aliases is None
        assert cfg.fusion == FusionConfig()
        assert cfg.f1_score_threshold == 0.5
        assert cfg.data_root == str(tmp_path)

    def test_inline_comments_stripped(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, """
            [pipeline]
            output = out   ; trailing note
            [dataset:a]
            format = coco  # another note
            path = x.json
        """))
        assert cfg.output == str(tmp_path / "out")
        assert cfg.datasets[0].format == "coco"

    def test_dataset_lookup(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, FULL))
        assert cfg.dataset("drive").names == "drive/names.txt"
        with pytest.raises(ConfigError):
            cfg.dataset("nope")

    def test_config_error_is_labelfuse_and_value_error(self):
        assert issubclass(ConfigError, LabelFuseError)
        assert issubclass(ConfigError, ValueError)


class TestDataRootPrecedence:
    def test_explicit_argument_wins(self, tmp_path, monkeypatch):
        monkeypatch.setenv(DATA_ROOT_ENV, "/env/root")
        cfg = load_config(write_cfg(tmp_path, FULL), data_root="/arg/root")
        assert cfg.data_root == "/arg/root"

    def test_environment_beats_pipeline_key(self, tmp_path, monkeypatch):
        monkeypatch.setenv(DATA_ROOT_ENV, "/env/root")
        cfg = load_config(write_cfg(tmp_path, FULL))
        assert cfg.data_root == "/env/root"

    def test_pipeline_key_beats_config_dir(self, tmp_path, monkeypatch):
        monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
        cfg = load_config(write_cfg(tmp_path, FULL))
        assert cfg.data_root == "/data"

    def test_config_dir_is_the_fallback(self, tmp_path, monkeypatch):
        monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
        sub = tmp_path / "cfg"
        sub.mkdir()
        cfg = load_config(write_cfg(sub, MINIMAL))
        assert cfg.data_root == str(sub)


class TestPathResolution:
    def test_relative_output_lands_next_to_config(self, tmp_path, monkeypatch):
        monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
        sub = tmp_path / "nested"
        sub.mkdir()
        cfg = load_config(write_cfg(sub, MINIMAL), data_root="/elsewhere")
        # data_root moves the inputs, never the output
        assert cfg.output == str(sub / "out")

    def test_absolute_output_kept(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, """
            [pipeline]
            output = /abs/results
            [dataset:a]
            format = coco
            path = x.json
        """))
        assert cfg.output == "/abs/results"

    def test_resolve_joins_data_root(self):
        cfg = PipelineConfig(datasets=(), detections=(), output="out",
                             data_root="/data/root")
        assert cfg.resolve("a/b.json") == Path("/data/root/a/b.json")
        assert cfg.resolve("/abs/b.json") == Path("/abs/b.json")


class TestErrors:
    def check(self, tmp_path, text, fragment):
        with pytest.raises(ConfigError) as err:
            load_config(write_cfg(tmp_path, text))
        assert fragment in str(err.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.ini")

    def test_malformed_ini(self, tmp_path):
        self.check(tmp_path, "format = coco\n", "cannot parse")

    def test_unknown_section(self, tmp_path):
        self.check(tmp_path, MINIMAL + "\n[weird]\nx = 1\n", "unknown section")

    def test_unknown_pipeline_key(self, tmp_path):
        self.check(tmp_path, "[pipeline]\nbudget = 3\n" + MINIMAL, "unknown keys")

    def test_unknown_dataset_key(self, tmp_path):
        self.check(tmp_path, """
            [dataset:a]
            format = coco
            path = x.json
            shard = 1
        """, "unknown keys")

    def test_unknown_detection_key(self, tmp_path):
        self.check(tmp_path, MINIMAL +
                   "[detections:m]\npath = m.json\nspace_of = solo\ndevice = cuda\n",
                   "unknown keys")

    def test_dataset_without_id(self, tmp_path):
        self.check(tmp_path, """
            [dataset:]
            format = coco
            path = x.json
        """, "needs an id")

    def test_bad_format(self, tmp_path):
        self.check(tmp_path, """
            [dataset:a]
            format = voc
            path = x.json
        """, "format must be one of")

    def test_missing_format(self, tmp_path):
        self.check(tmp_path, "[dataset:a]\npath = x.json\n", "format must be one of")

    def test_missing_path(self, tmp_path):
        self.check(tmp_path, "[dataset:a]\nformat = coco\n", "missing 'path'")

    def test_yolo_requires_names(self, tmp_path):
        self.check(tmp_path, """
            [dataset:a]
            format = yolo
            path = root
        """, "requires 'names'")

    def test_detections_without_id(self, tmp_path):
        self.check(tmp_path, MINIMAL +
                   "[detections:]\npath = m.json\nspace_of = solo\n",
                   "needs a model id")

    def test_detections_missing_keys(self, tmp_path):
        self.check(tmp_path, MINIMAL + "[detections:m]\npath = m.json\n",
                   "needs 'path' and 'space_of'")

    def test_space_of_must_be_declared(self, tmp_path):
        self.check(tmp_path, MINIMAL +
                   "[detections:m]\npath = m.json\nspace_of = ghost\n",
                   "undeclared dataset")

    def test_no_datasets(self, tmp_path):
        self.check(tmp_path, "[pipeline]\noutput = out\n", "declares no")

    def test_bad_f1_threshold_value(self, tmp_path):
        self.check(tmp_path, "[pipeline]\nf1_score_threshold = high\n" + MINIMAL,
                   "f1_score_threshold")

    def test_f1_threshold_out_of_range(self, tmp_path):
        self.check(tmp_path, "[pipeline]\nf1_score_threshold = 1.5\n" + MINIMAL,
                   "must be in [0, 1]")


class TestFusionSection:
    def load_with_fusion(self, tmp_path, body):
        return load_config(write_cfg(tmp_path, MINIMAL + "\n[fusion]\n" + body))

    def test_partial_override_keeps_other_defaults(self, tmp_path):
        cfg = self.load_with_fusion(tmp_path, "tau_accept = 0.9\n")
        assert cfg.fusion.tau_accept == 0.9
        assert cfg.fusion.tau_discard == FusionConfig().tau_discard
        assert cfg.fusion.strategy is Strategy.WEIGHTED_AVERAGE

    def test_strategy_is_case_insensitive(self, tmp_path):
        cfg = self.load_with_fusion(tmp_path, "strategy = Highest_Score\n")
        assert cfg.fusion.strategy is Strategy.HIGHEST_SCORE

    def test_bad_float(self, tmp_path):
        with pytest.raises(ConfigError, match="bad numeric value"):
            self.load_with_fusion(tmp_path, "tau_accept = warm\n")

    def test_bad_boolean(self, tmp_path):
        with pytest.raises(ConfigError, match="bad numeric value"):
            self.load_with_fusion(tmp_path, "suppress_gt_classes = maybe\n")

    def test_unknown_strategy(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown fusion strategy"):
            self.load_with_fusion(tmp_path, "strategy = vote\n")

    def test_inconsistent_thresholds(self, tmp_path):
        with pytest.raises(ConfigError, match="invalid \\[fusion\\]"):
            self.load_with_fusion(tmp_path, "tau_accept = 0.1\ntau_discard = 0.5\n")

    def test_unknown_fusion_key(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown keys"):
            self.load_with_fusion(tmp_path, "vote_weight = 2\n")
