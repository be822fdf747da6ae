"""Configuration resolution: defaults, file/flag precedence, validation,
and the settings hash."""

import json

import pytest

from pixadapt import ConfigError, RunConfig, config_hash, resolve_config, with_overrides
from pixadapt.config import OUTPUT_ROOT_ENV


class TestDefaults:
    def test_baseline_values(self):
        cfg = RunConfig()
        assert cfg.adapter == "basic"
        assert cfg.threshold == 0.5
        assert cfg.score_reduction == "mean"
        assert cfg.k_references == 10
        assert cfg.pairs_per_label == 200
        assert cfg.min_negative_offset == 0
        assert cfg.background_margin == 0.0
        assert cfg.normalize_features is False
        assert cfg.epochs == 40
        assert cfg.batch_size == 64
        assert cfg.learning_rate == pytest.approx(1e-3)
        assert cfg.embed_dim == 64
        assert cfg.connectivity == 8
        assert cfg.min_size == 5
        assert cfg.prompt_count == 10
        assert cfg.refine_tolerance == 0.5
        assert cfg.radius == 10.0
        assert cfg.seed == 0

    def test_output_root_env_override(self, monkeypatch):
        monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)
        assert RunConfig().output_root == "runs"
        monkeypatch.setenv(OUTPUT_ROOT_ENV, "/tmp/elsewhere")
        assert RunConfig().output_root == "/tmp/elsewhere"


class TestResolution:
    def test_file_overrides_defaults(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({"adapter": "contrastive", "epochs": 7}))
        cfg = resolve_config(f)
        assert cfg.adapter == "contrastive"
        assert cfg.epochs == 7
        assert cfg.batch_size == 64  # untouched default

    def test_flags_override_file(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({"epochs": 7, "seed": 1}))
        cfg = resolve_config(f, overrides={"epochs": 9, "seed": None})
        assert cfg.epochs == 9
        assert cfg.seed == 1  # None override means "not given"

    def test_hidden_sizes_from_file_lists(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({"clf_hidden": [16, 8], "twin_hidden": [4]}))
        cfg = resolve_config(f)
        assert cfg.clf_hidden == (16, 8)
        assert cfg.twin_hidden == (4,)

    def test_unknown_keys_rejected(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps({"learning_rte": 0.1}))
        with pytest.raises(ConfigError, match="learning_rte"):
            resolve_config(f)

    def test_invalid_json_rejected(self, tmp_path):
        f = tmp_path / "cfg.json"
        f.write_text("{nope")
        with pytest.raises(ConfigError):
            resolve_config(f)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            resolve_config(tmp_path / "absent.json")

    def test_with_overrides_skips_none(self):
        cfg = with_overrides(RunConfig(), threshold=0.8, seed=None)
        assert cfg.threshold == 0.8
        assert cfg.seed == 0


class TestValidation:
    @pytest.mark.parametrize(
        "field,value",
        [
            ("adapter", "magic"),
            ("score_reduction", "median"),
            ("threshold", 1.5),
            ("threshold", -2.0),
            ("connectivity", 6),
            ("k_references", 0),
            ("pairs_per_label", 0),
            ("epochs", 0),
            ("batch_size", -1),
            ("embed_dim", 0),
            ("prompt_count", 0),
            ("min_negative_offset", -1),
            ("min_size", -2),
            ("refine_tolerance", -0.5),
            ("learning_rate", 0.0),
            ("radius", -1.0),
            ("clf_hidden", (0,)),
        ],
    )
    def test_out_of_range_rejected(self, field, value):
        with pytest.raises(ConfigError):
            RunConfig(**{field: value})


class TestHash:
    def test_stable_across_instances(self):
        assert config_hash(RunConfig(seed=4)) == config_hash(RunConfig(seed=4))

    def test_sensitive_to_every_field(self):
        base = config_hash(RunConfig())
        assert config_hash(RunConfig(threshold=0.6)) != base
        assert config_hash(RunConfig(adapter="contrastive")) != base
        assert config_hash(RunConfig(twin_hidden=(32,))) != base

    def test_short_hex(self):
        h = config_hash(RunConfig())
        assert len(h) == 12
        int(h, 16)
