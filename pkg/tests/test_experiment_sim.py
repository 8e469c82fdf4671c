# tests/test_experiment_sim.py
import math

import numpy as np
import pytest
from pydantic import ValidationError

from models.experiment import ExperimentModel
from models.pipeline_config import ModelOverrides
from models.settings import AnalyzerSetting, JointSetting, Port
from tools.coincidence_analysis import car, fit_fringe, reduce_histogram, visibility_report
from tools.experiment_sim import (
    align_sweep_settings,
    build_model,
    lab_state,
    paper_reference_model,
    run_campaign,
    simulate_acquisition,
    simulate_histogram,
)
from tools.polarization_optics import analyzed_vector, coincidence_probability, settings_for_vector
from tools.quantum_core import fidelity, projector, target_state
from tools.tomography import james_settings

SWEEP = [math.radians(5 * k) for k in range(18)]


def _aligned_setting(model: ExperimentModel) -> JointSetting:
    """Both analyzers on the chip's |H>, as seen through the fibers."""
    h = np.array([1, 0], dtype=complex)
    return JointSetting(alice=settings_for_vector(model.fiber_a @ h, Port.V),
                        bob=settings_for_vector(model.fiber_b @ h, Port.H))


class TestExperimentModel:

    def test_reference_parameters(self, reference_model):
        assert reference_model.n_bins == 100
        assert reference_model.window_length == pytest.approx(0.8e-9)
        assert reference_model.accidental_rate * reference_model.window_length == pytest.approx(0.05)

    def test_window_beyond_range_rejected(self, target_rho):
        with pytest.raises(ValidationError):
            ExperimentModel(chip_state=target_rho, window_end=30e-9)

    def test_partial_bin_range_rejected(self, target_rho):
        with pytest.raises(ValidationError):
            ExperimentModel(chip_state=target_rho, t_max=25.1e-9)

    def test_negative_rate_rejected(self, target_rho):
        with pytest.raises(ValidationError):
            ExperimentModel(chip_state=target_rho, pair_rate=-1.0)

    def test_default_overrides_match_reference(self, reference_model):
        model = build_model(ModelOverrides(), seed=7)
        np.testing.assert_allclose(model.chip_state, reference_model.chip_state, atol=1e-12)
        np.testing.assert_allclose(model.fiber_a, reference_model.fiber_a, atol=1e-12)
        np.testing.assert_allclose(model.fiber_b, reference_model.fiber_b, atol=1e-12)
        assert model.accidental_rate == pytest.approx(reference_model.accidental_rate)
        assert model.angle_jitter == pytest.approx(reference_model.angle_jitter)

    def test_reference_chip_state_is_dephased_target(self, reference_model):
        rho = reference_model.chip_state
        assert reference_model.angle_jitter == 0.0
        np.testing.assert_allclose(np.real(np.diag(rho)), [0.6, 0.0, 0.0, 0.4], atol=1e-12)
        assert np.real(rho[0, 3]) == pytest.approx(0.76 * math.sqrt(0.24), abs=1e-12)
        assert fidelity(rho, projector(target_state(math.sqrt(0.6), math.sqrt(0.4)))) == pytest.approx(
            0.52 + 2 * 0.76 * 0.24, abs=1e-9)


class TestSimulation:

    def test_same_seed_same_histogram(self, reference_model):
        j = _aligned_setting(reference_model)
        first = simulate_histogram(reference_model, j, 1200, stream=(4,))
        second = simulate_histogram(reference_model, j, 1200, stream=(4,))
        np.testing.assert_array_equal(first.counts, second.counts)
        assert first.singles_a == second.singles_a

    def test_streams_are_independent(self, reference_model):
        j = _aligned_setting(reference_model)
        a = simulate_histogram(reference_model, j, 1200, stream=(0,))
        b = simulate_histogram(reference_model, j, 1200, stream=(1,))
        assert not np.array_equal(a.counts, b.counts)

    def test_histogram_shape_and_label(self, reference_model):
        j = _aligned_setting(reference_model)
        h = simulate_histogram(reference_model, j, 10)
        assert len(h.counts) == reference_model.n_bins
        assert JointSetting.from_label(h.label).channel == j.channel

    def test_acquisition_shares_singles(self, reference_model):
        j = _aligned_setting(reference_model)
        out = simulate_acquisition(reference_model, j.alice, j.bob, 600)
        assert set(out) == {Port.H, Port.V}
        assert out[Port.H].singles_a == out[Port.V].singles_a

    def test_accidental_floor_mean(self, target_rho):
        """pair_rate 0 leaves a flat Poisson floor of rate * duration * bin_width per bin."""
        model = ExperimentModel(chip_state=target_rho, pair_rate=0.0, accidental_rate=4e10,
                                dark_rate_per_detector=0.0)
        j = _aligned_setting(model)
        counts = np.concatenate([simulate_histogram(model, j, 1.0, stream=(k,)).counts for k in range(100)])
        assert counts.mean() == pytest.approx(10.0, abs=4 * math.sqrt(10 / counts.size))

    def test_born_rule_counts(self, noiseless_model):
        duration = 1e4
        rho = lab_state(noiseless_model)
        records = run_campaign(noiseless_model, james_settings(), duration)
        for record in records:
            mean = duration * coincidence_probability(rho, record.setting) / 0.6
            assert record.tau_acc == 0.0
            assert record.n_net == record.n_raw
            assert abs(record.n_raw - mean) <= 4 * math.sqrt(mean) + 1

    def test_missing_detector_rejected(self, reference_model):
        j = _aligned_setting(reference_model)
        with pytest.raises(ValueError):
            simulate_histogram(reference_model, JointSetting(alice=j.alice.with_port(Port.H), bob=j.bob), 10)

    def test_non_positive_duration_rejected(self, reference_model):
        with pytest.raises(ValueError):
            simulate_histogram(reference_model, _aligned_setting(reference_model), 0.0)

    def test_reference_car_at_aligned_setting(self, reference_model):
        j = _aligned_setting(reference_model)
        values = []
        for k in range(50):
            record = reduce_histogram(simulate_histogram(reference_model, j, 1200, stream=(k,)), j)
            values.append(car(record.n_raw, record.tau_acc, record.window_length))
        assert np.mean(values) == pytest.approx(8.0, rel=0.2)

    def test_fiber_rotations_are_covariant(self, reference_model, rng):
        """Fibers on the state give the same means as identity fibers with conjugated analyzers."""
        unrotated = reference_model.model_copy(update={"fiber_a": np.eye(2, dtype=complex),
                                                       "fiber_b": np.eye(2, dtype=complex)})
        for _ in range(20):
            j = JointSetting(
                alice=AnalyzerSetting(qwp_angle=rng.uniform(0, math.pi), hwp_angle=rng.uniform(0, math.pi),
                                      port=Port.V),
                bob=AnalyzerSetting(qwp_angle=rng.uniform(0, math.pi), hwp_angle=rng.uniform(0, math.pi),
                                    port=Port.H if rng.uniform() < 0.5 else Port.V),
            )
            conjugated = JointSetting(
                alice=settings_for_vector(reference_model.fiber_a.conj().T @ analyzed_vector(j.alice), Port.V),
                bob=settings_for_vector(reference_model.fiber_b.conj().T @ analyzed_vector(j.bob), j.bob.port),
            )
            assert coincidence_probability(lab_state(reference_model), j) == pytest.approx(
                coincidence_probability(lab_state(unrotated), conjugated), abs=1e-12)

    def test_covariance_holds_for_simulated_means(self, reference_model):
        unrotated = reference_model.model_copy(update={"fiber_a": np.eye(2, dtype=complex),
                                                       "fiber_b": np.eye(2, dtype=complex)})
        j = JointSetting(alice=AnalyzerSetting(qwp_angle=0.3, hwp_angle=1.1, port=Port.V),
                         bob=AnalyzerSetting(qwp_angle=2.0, hwp_angle=0.4, port=Port.H))
        conjugated = JointSetting(
            alice=settings_for_vector(reference_model.fiber_a.conj().T @ analyzed_vector(j.alice), Port.V),
            bob=settings_for_vector(reference_model.fiber_b.conj().T @ analyzed_vector(j.bob), Port.H),
        )
        rotated = np.array([reduce_histogram(simulate_histogram(reference_model, j, 100, stream=(k,))).n_raw
                            for k in range(200)])
        plain = np.array([reduce_histogram(simulate_histogram(unrotated, conjugated, 100, stream=(k,))).n_raw
                          for k in range(200)])
        # identical Born probabilities draw from identical Poisson means on each stream
        np.testing.assert_allclose(rotated, plain)

    def test_mean_raw_counts_match_analytic_mean(self, reference_model):
        """200 repeats of the aligned setting: sample mean within 3 standard errors of the model mean."""
        j = _aligned_setting(reference_model)
        duration = 100.0
        values = np.array([reduce_histogram(simulate_histogram(reference_model, j, duration, stream=(k,))).n_raw
                           for k in range(200)])
        signal = reference_model.pair_rate * duration
        # the 0.8 ns window spans 3.2 bins of 250 ps
        accidentals = reference_model.accidental_rate * duration * reference_model.bin_width * 3.2
        standard_error = values.std(ddof=1) / math.sqrt(len(values))
        assert abs(values.mean() - (signal + accidentals)) <= 3 * standard_error
        # the straddling bin enters with weight 0.2, so its variance with weight 0.04
        assert values.var(ddof=1) == pytest.approx(signal + accidentals * 3.04 / 3.2, rel=0.3)


class TestSweep:

    def test_sweep_layout(self, reference_model):
        settings, acquisitions = align_sweep_settings(reference_model, SWEEP)
        assert len(settings) == 2 * len(SWEEP)
        assert acquisitions[:4] == [0, 0, 1, 1]
        assert {s.channel for s in settings} == {"AVBH", "AVBV"}
        assert len({s.alice.qwp_angle for s in settings}) == 1

    def test_noiseless_fringes_have_full_contrast(self, reference_model):
        settings, _ = align_sweep_settings(reference_model, SWEEP)
        rho = lab_state(reference_model)
        for channel in ("AVBH", "AVBV"):
            chosen = [s for s in settings if s.channel == channel]
            p = [coincidence_probability(rho, s) for s in chosen]
            fit = fit_fringe([s.alice.hwp_angle for s in chosen], p)
            assert fit.visibility == pytest.approx(1.0, abs=1e-9)

    def test_first_point_is_aligned_setting(self, reference_model):
        """Angle 0 puts both AVBV analyzers on the chip's |H>, where the CAR is defined."""
        settings, _ = align_sweep_settings(reference_model, SWEEP)
        first = next(s for s in settings if s.channel == "AVBV")
        rho = lab_state(reference_model)
        assert coincidence_probability(rho, first) == pytest.approx(0.6, abs=1e-9)
        quarter = next(s for s in settings[2 * 9:] if s.channel == "AVBV")
        assert coincidence_probability(rho, quarter) == pytest.approx(0.0, abs=1e-9)

    def test_empty_sweep_rejected(self, reference_model):
        with pytest.raises(ValueError):
            align_sweep_settings(reference_model, [])

    @pytest.mark.slow
    def test_reference_visibility(self, reference_model):
        settings, acquisitions = align_sweep_settings(reference_model, SWEEP)
        records = run_campaign(reference_model, settings, 1200, campaign=1, acquisitions=acquisitions)
        report = visibility_report(records)
        channel = report.channel("AVBV")
        assert channel.visibility_net >= 0.95
        assert 0.7 <= channel.visibility_raw <= 0.9
        assert report.singles is not None
        # Alice singles swing 0.4..0.6 of 4000 Hz over a 10 Hz dark floor
        mean_rate = 0.5 * reference_model.singles_rate_scale + reference_model.dark_rate_per_detector
        expected = 0.2 * 0.5 * reference_model.singles_rate_scale / mean_rate
        sigma = math.sqrt(2 / (mean_rate * 1200 * len(SWEEP)))
        assert abs(report.singles.visibility - expected) <= 3 * sigma
        assert report.singles.visibility == pytest.approx(0.2, abs=0.002)


class TestSingles:

    def test_single_rate_in_range(self, reference_model):
        bob = _aligned_setting(reference_model).bob
        j = JointSetting(alice=AnalyzerSetting(qwp_angle=0.0, hwp_angle=0.0, port=Port.V), bob=bob)
        h = simulate_histogram(reference_model, j, 100)
        # 4000 Hz at most, plus darks
        assert 0 < h.singles_a < 100 * 4200


class TestCampaignRuns:

    def test_silent_model_gives_empty_histogram(self, target_rho):
        model = ExperimentModel(chip_state=target_rho, pair_rate=0.0, dark_rate_per_detector=0.0)
        h = simulate_histogram(model, _aligned_setting(model), 100)
        assert h.counts.sum() == 0
        assert h.singles_a == 0

    def test_single_setting(self, noiseless_model):
        assert len(run_campaign(noiseless_model, [_aligned_setting(noiseless_model)], 10)) == 1

    def test_empty_settings_rejected(self, noiseless_model):
        with pytest.raises(ValueError):
            run_campaign(noiseless_model, [], 10)
