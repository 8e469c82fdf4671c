# tests/test_pipeline_config.py
import json
import math

import numpy as np
import pytest

from config.config import DEFAULT_SEED
from models.pipeline_config import ModelOverrides, PipelineConfig
from pipelines.campaigns import campaign_kinds, plan_campaign
from tools.experiment_sim import paper_reference_model
from utils.errors import ConfigError


class TestPipelineConfig:

    def test_defaults(self):
        config = PipelineConfig()
        assert config.campaign == "full"
        assert config.seed == DEFAULT_SEED
        assert config.counts_mode in ("raw", "net")
        assert config.sweep_angles_deg() == [5.0 * k for k in range(18)]

    def test_overrides_skip_unset_flags(self):
        config = PipelineConfig().with_overrides(seed=11, campaign=None, output_dir="out")
        assert config.seed == 11
        assert config.campaign == "full"
        assert config.output_dir == "out"

    def test_invalid_file_lists_fields(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"campaign": "bell", "durations": {"chsh": -1}}))
        with pytest.raises(ConfigError) as info:
            PipelineConfig.from_file(path)
        fields = {d["field"] for d in info.value.diagnostics}
        assert "campaign" in fields
        assert "durations.chsh" in fields

    def test_invalid_flag_rejected(self):
        with pytest.raises(ConfigError):
            PipelineConfig().with_overrides(counts_mode="gross")

    def test_amplitude_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"model": {"a": 1.2}}))
        with pytest.raises(ConfigError):
            PipelineConfig.from_file(path)

    def test_flags_win_over_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"seed": 3, "campaign": "chsh"}))
        config = PipelineConfig.from_file(path, seed=9)
        assert (config.seed, config.campaign) == (9, "chsh")

    def test_reference_model(self):
        model = PipelineConfig(seed=5).build_model()
        np.testing.assert_allclose(model.fiber_a, paper_reference_model(5).fiber_a)
        assert model.seed == 5

    def test_custom_model(self):
        overrides = ModelOverrides(a=0.8, car=None, angle_jitter_deg=0.0, fiber_a_deg=(0, 0, 0))
        model = PipelineConfig(model=overrides).build_model()
        assert model.accidental_rate == 0.0
        assert model.angle_jitter == 0.0
        np.testing.assert_allclose(model.fiber_a, np.eye(2), atol=1e-15)
        assert np.real(model.chip_state[0, 0]) == pytest.approx(0.64)
        assert np.real(model.chip_state[0, 3]) == pytest.approx(0.76 * 0.8 * 0.6)


class TestCampaignPlan:

    def test_full_campaign_order(self):
        assert campaign_kinds("full") == ["visibility-sweep", "tomography", "chsh"]
        assert campaign_kinds("chsh") == ["chsh"]

    def test_tomography_plan(self):
        config = PipelineConfig(campaign="tomography")
        plan = plan_campaign("tomography", config.build_model(), config)
        assert len(plan.settings) == 16
        assert plan.acquisitions == list(range(16))
        assert plan.duration == config.durations.tomography

    def test_chsh_plan_predicts_violation(self):
        config = PipelineConfig(campaign="chsh")
        plan = plan_campaign("chsh", config.build_model(), config)
        assert len(plan.settings) == 16
        # linear analyzers reach 2 sqrt(1 + (2 lambda a b)^2) on the dephased target
        assert plan.predicted_s == pytest.approx(2 * math.sqrt(1 + (2 * 0.76) ** 2 * 0.24), abs=1e-4)

    def test_unknown_campaign_rejected(self):
        config = PipelineConfig()
        with pytest.raises(ValueError):
            plan_campaign("eraser", config.build_model(), config)
