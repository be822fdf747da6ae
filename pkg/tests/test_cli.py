"""Command-line behavior, exercised through main(argv) return codes."""

import json
import subprocess
import sys

import pytest

from pixadapt import cli, synth
from pixadapt.errors import PipelineError

QUICK = [
    "--epochs", "12", "--pairs-per-label", "80",
    "--embed-dim", "8", "--twin-hidden", "16", "--head-hidden", "16",
]


@pytest.fixture(scope="module")
def scenario(tmp_path_factory):
    out = tmp_path_factory.mktemp("scen") / "separable"
    rc = cli.main([
        "synth", "--scenario", "separable", "--out", str(out),
        "--seed", "5", "--height", "32", "--width", "32", "--dim", "8", "--slices", "4",
    ])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def segment_run(scenario, tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    rc = cli.main([
        "segment", "--scenario-dir", str(scenario), "--train", "0,1", "--test", "2,3",
        "--adapter", "contrastive", "--run-name", "seg", "--output-root", str(root),
        "--seed", "3", *QUICK,
    ])
    assert rc == 0
    return root / "seg"


def test_synth_materializes_scenario(scenario, capsys):
    manifest = json.loads((scenario / "scenario.json").read_text())
    assert manifest["label_count"] == 3
    assert len(manifest["slices"]) == 4
    assert (scenario / "slice_002.features.pxf").exists()
    assert (scenario / "slice_002.mask.pxm").exists()
    assert (scenario / "slice_002.intensity.pxf").exists()


def test_synth_from_spec_file(tmp_path, capsys):
    spec = synth.two_intensity_scenario(seed=3, height=16, width=16, dim=4)
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(synth.spec_to_dict(spec)))
    out = tmp_path / "scen"
    assert cli.main(["synth", "--spec", str(spec_file), "--out", str(out)]) == 0
    assert "wrote" in capsys.readouterr().out
    assert (out / "slice_000.features.pxf").exists()


def test_synth_without_source_is_config_error(tmp_path):
    assert cli.main(["synth", "--out", str(tmp_path / "x")]) == 2


def test_localize_basic(scenario, tmp_path, capsys):
    rc = cli.main([
        "localize", "--scenario-dir", str(scenario), "--train", "0", "--test", "2",
        "--run-name", "loc", "--output-root", str(tmp_path),
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "task=localization" in out
    assert "run directory:" in out
    assert (tmp_path / "loc" / "threshold_sweep.csv").exists()
    assert (tmp_path / "loc" / "threshold_sweep.png").exists()


def test_segment_contrastive(segment_run, capsys):
    report = json.loads((segment_run / "report.json").read_text())
    assert report["task"] == "segmentation"
    assert report["aggregate"]["iou"] > 0.8
    assert (segment_run / "slices" / "slice_002" / "refined.pxm").exists()


def test_flag_beats_config_file(scenario, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"threshold": 0.9, "k_references": 4}))
    rc = cli.main([
        "localize", "--scenario-dir", str(scenario), "--train", "0", "--test", "2",
        "--config", str(cfg), "--threshold", "0.2",
        "--run-name", "ov", "--output-root", str(tmp_path),
    ])
    assert rc == 0
    manifest = json.loads((tmp_path / "ov" / "manifest.json").read_text())
    assert manifest["config"]["threshold"] == 0.2
    assert manifest["config"]["k_references"] == 4


def test_train_contrastive_and_inspect(scenario, tmp_path, capsys):
    model_path = tmp_path / "model.pxc"
    rc = cli.main([
        "train", "--scenario-dir", str(scenario), "--train", "0",
        "--adapter", "contrastive", "--out", str(model_path), *QUICK,
    ])
    assert rc == 0
    assert model_path.read_bytes()[:4] == b"PXC1"
    assert cli.main(["inspect", str(model_path)]) == 0
    out = capsys.readouterr().out
    assert "pair classes: 4" in out
    assert "twin:" in out and "head:" in out


def test_train_classification(scenario, tmp_path):
    model_path = tmp_path / "model.pxn"
    rc = cli.main([
        "train", "--scenario-dir", str(scenario), "--train", "0",
        "--adapter", "classification", "--clf-hidden", "16", "--epochs", "10",
        "--out", str(model_path),
    ])
    assert rc == 0
    assert model_path.read_bytes()[:4] == b"PXN1"


def test_train_basic_has_no_state(scenario, tmp_path, capsys):
    rc = cli.main([
        "train", "--scenario-dir", str(scenario), "--train", "0",
        "--adapter", "basic", "--out", str(tmp_path / "x"),
    ])
    assert rc == 2
    assert "nothing to save" in capsys.readouterr().err


def test_eval_reproduces_run_metrics(segment_run, capsys):
    assert cli.main(["eval", "--run-dir", str(segment_run)]) == 0
    out = capsys.readouterr().out
    assert "task=segmentation" in out
    stored = json.loads((segment_run / "report.json").read_text())
    assert f"{stored['aggregate']['iou']:.3f}" in out


def test_eval_writes_report_files(segment_run, tmp_path, capsys):
    out_path = tmp_path / "re-eval.json"
    rc = cli.main(["eval", "--run-dir", str(segment_run), "--out", str(out_path)])
    assert rc == 0
    assert out_path.exists()
    assert out_path.with_suffix(".csv").exists()


def test_inspect_feature_map_and_mask(scenario, capsys):
    assert cli.main(["inspect", str(scenario / "slice_000.features.pxf")]) == 0
    assert "shape: 32 x 32 x 8" in capsys.readouterr().out
    assert cli.main(["inspect", str(scenario / "slice_000.mask.pxm")]) == 0
    assert "labels up to 3" in capsys.readouterr().out


def test_inspect_json(scenario, capsys):
    assert cli.main(["inspect", str(scenario / "scenario.json")]) == 0
    assert "JSON with keys" in capsys.readouterr().out


def test_inspect_unknown_magic(tmp_path):
    bogus = tmp_path / "bogus.pxf"
    bogus.write_bytes(b"XXXXrest")
    assert cli.main(["inspect", str(bogus)]) == 3


def test_missing_paths_exit_3(tmp_path):
    assert cli.main(["inspect", str(tmp_path / "absent.pxf")]) == 3
    assert cli.main([
        "localize", "--scenario-dir", str(tmp_path / "absent"),
        "--train", "0", "--test", "1",
    ]) == 3


def test_invalid_config_exits_2(scenario, tmp_path):
    rc = cli.main([
        "localize", "--scenario-dir", str(scenario), "--train", "0", "--test", "2",
        "--threshold", "1.5", "--output-root", str(tmp_path),
    ])
    assert rc == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"not_a_setting": 1}))
    rc = cli.main([
        "localize", "--scenario-dir", str(scenario), "--train", "0", "--test", "2",
        "--config", str(bad), "--output-root", str(tmp_path),
    ])
    assert rc == 2


def test_pipeline_error_exits_4(monkeypatch, tmp_path, capsys):
    def boom(args):
        raise PipelineError("boom")

    monkeypatch.setattr(cli, "_cmd_inspect", boom)
    target = tmp_path / "f"
    target.write_text("x")
    assert cli.main(["inspect", str(target)]) == 4
    assert "boom" in capsys.readouterr().err


def test_help_lists_config_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["segment", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for flag in ("--adapter", "--threshold", "--min-size", "--prompt-count", "--seed"):
        assert flag in out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "pixadapt" in capsys.readouterr().out


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "pixadapt.cli", "--version"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "pixadapt" in proc.stdout
