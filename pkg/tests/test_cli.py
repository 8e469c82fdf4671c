# tests/test_cli.py
import json
import math

import pytest
from typer.testing import CliRunner

from main import app
from utils.errors import CountsError, FitError

try:
    runner = CliRunner(mix_stderr=False)
except TypeError:  # click >= 8.2 always keeps stderr separate
    runner = CliRunner()

NOISELESS_PHI_PLUS = {
    "model": {
        "a": 1 / math.sqrt(2),
        "car": None,
        "coherence": 1.0,
        "angle_jitter_deg": 0.0,
        "fiber_a_deg": [0.0, 0.0, 0.0],
        "fiber_b_deg": [0.0, 0.0, 0.0],
        "pair_rate": 100.0,
        "dark_rate_per_detector": 0.0,
        "singles_rate_scale": 0.0,
    },
    "durations": {"tomography": 10000},
    "campaign": "tomography",
}


def _error(result) -> dict:
    lines = [line for line in result.stderr.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


def _files(root):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


class TestSimulate:

    def test_tomography_campaign_files(self, tmp_path):
        out = tmp_path / "run"
        result = runner.invoke(app, ["simulate", "--campaign", "tomography", "--seed", "3", "--out", str(out)])
        assert result.exit_code == 0, result.stderr
        manifest = json.loads(result.stdout)
        assert [c["kind"] for c in manifest["campaigns"]] == ["tomography"]
        assert len(list((out / "tomography" / "histograms").glob("*.csv"))) == 16
        assert (out / "tomography" / "campaign.json").exists()
        assert (out / "manifest.json").exists()

    def test_same_seed_same_bytes(self, tmp_path):
        for name in ("a", "b"):
            result = runner.invoke(app, ["simulate", "--campaign", "tomography", "--seed", "3",
                                         "--out", str(tmp_path / name)])
            assert result.exit_code == 0, result.stderr
        a, b = tmp_path / "a" / "tomography", tmp_path / "b" / "tomography"
        assert _files(a) == _files(b)
        for rel in _files(a):
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

    def test_dry_run_writes_nothing(self, tmp_path):
        out = tmp_path / "dry"
        result = runner.invoke(app, ["simulate", "--campaign", "tomography", "--out", str(out), "--dry-run"])
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.stdout)["dry_run"] is True
        assert not out.exists()

    def test_invalid_config_reports_json_error(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"campaign": "bell"}))
        result = runner.invoke(app, ["simulate", "--config", str(config)])
        assert result.exit_code == 1
        error = _error(result)
        assert error["error"] == "ConfigError"
        assert any(d["field"] == "campaign" for d in error["diagnostics"])

    def test_missing_config_file(self, tmp_path):
        result = runner.invoke(app, ["simulate", "--config", str(tmp_path / "absent.json")])
        assert result.exit_code == 1
        assert _error(result)["error"] == "FileNotFoundError"


class TestAnalyze:

    def test_noiseless_tomography_round_trip(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(NOISELESS_PHI_PLUS))
        out = tmp_path / "run"
        result = runner.invoke(app, ["simulate", "--config", str(config), "--out", str(out)])
        assert result.exit_code == 0, result.stderr

        campaign = out / "tomography" / "campaign.json"
        result = runner.invoke(app, ["analyze", str(campaign), "--kind", "tomography", "--out", str(out / "report")])
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["fidelity_truth"] >= 0.999
        assert report["fidelity_maximal"] >= 0.999
        assert (out / "report" / "tomography_report_net.json").exists()
        assert (out / "report" / "tomography_bars_net.csv").exists()

    def test_histogram_files_as_input(self, tmp_path):
        out = tmp_path / "run"
        runner.invoke(app, ["simulate", "--campaign", "tomography", "--out", str(out)])
        files = sorted(str(p) for p in (out / "tomography" / "histograms").glob("*.csv"))
        result = runner.invoke(app, ["analyze", *files, "--kind", "tomography", "--mode", "raw",
                                     "--out", str(tmp_path / "report")])
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.stdout)["mode"] == "raw"

    def test_unknown_kind_rejected(self, tmp_path):
        out = tmp_path / "run"
        runner.invoke(app, ["simulate", "--campaign", "tomography", "--out", str(out)])
        result = runner.invoke(app, ["analyze", str(out / "tomography" / "campaign.json"), "--kind", "eraser",
                                     "--out", str(tmp_path / "report")])
        assert result.exit_code == 1
        assert _error(result)["error"] == "ValueError"

    def test_malformed_histogram_reports_file_and_line(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("not a histogram\n")
        result = runner.invoke(app, ["analyze", str(bad), "--kind", "visibility", "--out", str(tmp_path / "r")])
        assert result.exit_code == 1
        error = _error(result)
        assert error["error"] == "InputFormatError"
        assert f"{bad}:1:" in error["message"]


class TestPipeline:

    def test_dry_run(self, tmp_path):
        out = tmp_path / "dry"
        result = runner.invoke(app, ["pipeline", "--out", str(out), "--dry-run"])
        assert result.exit_code == 0, result.stderr
        summary = json.loads(result.stdout)
        assert [c["kind"] for c in summary["plan"]] == ["visibility-sweep", "tomography", "chsh"]
        assert summary["paper_S"] == 2.37
        assert not out.exists()

    @pytest.mark.slow
    def test_full_run_writes_summary(self, tmp_path):
        out = tmp_path / "full"
        result = runner.invoke(app, ["pipeline", "--seed", "7", "--out", str(out)])
        assert result.exit_code == 0, result.stderr
        summary = json.loads((out / "summary.json").read_text())
        for key in ("car", "visibility_net", "visibility_raw", "fidelity", "fidelity_raw", "fidelity_maximal",
                    "a_squared", "S", "sigma_S", "violation_sigmas", "predicted_S"):
            assert key in summary
        assert summary["S"] > 2.0
        assert 0.5 <= summary["a_squared"] <= 0.7
        assert summary["car"] == pytest.approx(summary["paper_car"], rel=0.25)
        assert "errors" not in summary

    def test_failed_stages_are_aggregated(self, tmp_path, mocker):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"durations": {"visibility": 20, "tomography": 20, "chsh": 20}}))
        mocker.patch("pipelines.full_pipeline.analyze_visibility", side_effect=FitError("degenerate design"))
        mocker.patch("pipelines.full_pipeline.analyze_chsh", side_effect=CountsError("no counts"))
        mocker.patch("pipelines.full_pipeline.analyze_tomography",
                     return_value={"fidelity": 0.9, "fidelity_maximal": 0.87, "a_squared": 0.6})
        out = tmp_path / "partial"
        result = runner.invoke(app, ["pipeline", "--config", str(config), "--out", str(out)])
        assert result.exit_code == 1
        error = _error(result)
        assert error["error"] == "PipelineError"
        assert [d["stage"] for d in error["diagnostics"]] == ["visibility-sweep", "chsh"]
        assert [d["error"] for d in error["diagnostics"]] == ["FitError", "CountsError"]
        summary = json.loads((out / "summary.json").read_text())
        assert summary["fidelity"] == 0.9
        assert "S" not in summary
        assert len(summary["errors"]) == 2

    @pytest.mark.slow
    def test_chsh_command(self, tmp_path):
        result = runner.invoke(app, ["chsh", "--out", str(tmp_path / "chsh")])
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.stdout)["S"] > 2.0
