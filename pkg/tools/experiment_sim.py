# tools/experiment_sim.py
"""
Forward Monte Carlo of the bench: chip state -> fiber rotations -> analyzers -> detectors -> DAS.

Every acquisition owns independent random streams derived from
SeedSequence(model.seed, spawn_key=(*stream, purpose, ...)), so results do not depend on
the order or the process in which acquisitions are simulated.
"""
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.experiment import ExperimentModel, Histogram
from models.records import MeasurementRecord
from models.settings import AnalyzerSetting, JointSetting, Port
from tools.coincidence_analysis import reduce_histogram
from tools.polarization_optics import coincidence_probability, settings_for_vector, singles_probability
from tools.quantum_core import (
    apply_local_rotation,
    dephase,
    jones_from_angles,
    projector,
    target_state,
    werner_mixture,
)
from utils.logging_setup import setup_logging

logger = setup_logging()

REFERENCE_CAR = 8.0
REFERENCE_PAIR_RATE = 0.4
REFERENCE_BIN_WIDTH = 250e-12
REFERENCE_WINDOW = 0.8e-9
REFERENCE_DARK_RATE = 10.0
REFERENCE_A2 = 0.6
REFERENCE_COHERENCE = 0.76
DEFAULT_DURATION = 1200.0

_JITTER, _SINGLES, _COINCIDENCES = 0, 1, 2
_PORT_INDEX = {Port.H: 0, Port.V: 1}


def paper_reference_model(seed: int = 0) -> ExperimentModel:
    """
    Bench parameters of the published source, with CAR = 8 at the aligned setting.

    The chip state keeps only a fraction REFERENCE_COHERENCE of the HH-VV coherence, which
    sets the fidelity to the ideal target near 0.88 while H/V-basis fringes stay at full contrast.
    Plates are exact; angle_jitter is a perturbation knob for callers.
    """
    target = projector(target_state(math.sqrt(REFERENCE_A2), math.sqrt(1 - REFERENCE_A2)))
    return ExperimentModel(
        chip_state=dephase(target, REFERENCE_COHERENCE),
        fiber_a=jones_from_angles(math.radians(20), math.radians(35), math.radians(-15)),
        fiber_b=jones_from_angles(math.radians(-30), math.radians(15), math.radians(40)),
        pair_rate=REFERENCE_PAIR_RATE,
        accidental_rate=REFERENCE_PAIR_RATE / (REFERENCE_CAR * REFERENCE_WINDOW),
        dark_rate_per_detector=REFERENCE_DARK_RATE,
        singles_rate_scale=4000.0,
        bin_width=REFERENCE_BIN_WIDTH,
        t_max=25e-9,
        window_start=0.0,
        window_end=REFERENCE_WINDOW,
        angle_jitter=0.0,
        alice_ports=(Port.V,),
        bob_ports=(Port.H, Port.V),
        seed=seed,
    )


def lab_state(model: ExperimentModel) -> np.ndarray:
    """State reaching the analyzers: (F_A ⊗ F_B) rho_chip (F_A ⊗ F_B)^dagger."""
    return apply_local_rotation(model.chip_state, model.fiber_a, model.fiber_b)


def reference_probability(model: ExperimentModel) -> float:
    """Coincidence probability with both analyzers aligned to the dominant product axis."""
    p_ref = float(np.max(np.real(np.diag(model.chip_state))))
    if p_ref <= 0:
        raise ValueError("chip state has no weight on the product basis")
    return p_ref


def _rng(model: ExperimentModel, stream: Sequence[int], *purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(model.seed, spawn_key=(*stream, *purpose)))


def _jitter(setting: AnalyzerSetting, offsets: np.ndarray) -> AnalyzerSetting:
    return AnalyzerSetting(qwp_angle=setting.qwp_angle + offsets[0],
                           hwp_angle=setting.hwp_angle + offsets[1],
                           port=setting.port)


def _signal_bins(model: ExperimentModel) -> np.ndarray:
    first = int(round(model.window_start / model.bin_width))
    last = int(math.floor(model.window_end / model.bin_width + 1e-9))
    if last <= first:
        last = first + 1
    return np.arange(first, last)


def simulate_acquisition(model: ExperimentModel, alice: AnalyzerSetting, bob: AnalyzerSetting,
                         duration: float, stream: Sequence[int] = (0,),
                         bob_ports: Optional[Sequence[Port]] = None) -> Dict[Port, Histogram]:
    """
    One acquisition: fixed plates on both arms, a histogram for each of Bob's detectors.

    Plate miscalibration (uniform within +/- angle_jitter) and Alice's singles are drawn once
    per acquisition and shared by the histograms it produces.
    """
    if not duration > 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if alice.port not in model.alice_ports:
        logger.error(f"Alice port {alice.port.value} has no detector (available: {model.alice_ports})")
        raise ValueError(f"Alice's {alice.port.value} output has no detector")
    ports = tuple(bob_ports) if bob_ports is not None else model.bob_ports
    for port in ports:
        if port not in model.bob_ports:
            raise ValueError(f"Bob's {port.value} output has no detector")

    offsets = _rng(model, stream, _JITTER).uniform(-1.0, 1.0, size=4) * model.angle_jitter
    alice_true = _jitter(alice, offsets[:2])
    bob_true = _jitter(bob, offsets[2:])

    rho = lab_state(model)
    p_ref = reference_probability(model)
    p_singles = singles_probability(rho, alice_true, "A")
    singles_mean = (model.singles_rate_scale * p_singles + model.dark_rate_per_detector) * duration
    singles = int(_rng(model, stream, _SINGLES, _PORT_INDEX[alice.port]).poisson(singles_mean))

    acc_mean = model.accidental_rate * duration * model.bin_width
    signal_bins = _signal_bins(model)
    histograms = {}
    for port in ports:
        p = coincidence_probability(rho, JointSetting(alice=alice_true, bob=bob_true.with_port(port)))
        signal_mean = model.pair_rate * duration * p / p_ref
        rng = _rng(model, stream, _COINCIDENCES, _PORT_INDEX[alice.port], _PORT_INDEX[port])
        counts = rng.poisson(acc_mean, size=model.n_bins).astype(np.int64)
        n_signal = int(rng.poisson(signal_mean))
        counts[signal_bins] += rng.multinomial(n_signal, np.full(len(signal_bins), 1.0 / len(signal_bins)))
        label = JointSetting(alice=alice, bob=bob.with_port(port)).label
        logger.debug(f"[{label}] p={p:.4f} signal={n_signal} singles={singles}")
        histograms[port] = Histogram(
            bin_width=model.bin_width,
            counts=counts,
            window_start=model.window_start,
            window_end=model.window_end,
            t_max=model.t_max,
            duration=duration,
            singles_a=singles,
            label=label,
        )
    return histograms


def simulate_histogram(model: ExperimentModel, j: JointSetting, duration: float,
                       stream: Sequence[int] = (0,)) -> Histogram:
    return simulate_acquisition(model, j.alice, j.bob, duration, stream, bob_ports=(j.bob.port,))[j.bob.port]


def simulate_campaign(model: ExperimentModel, settings: List[JointSetting], duration_each: float,
                      campaign: int = 0, acquisitions: Optional[List[int]] = None) -> List[Histogram]:
    """
    Histograms for a list of joint settings.

    Settings sharing an acquisition index share plates, jitter and singles (Bob's two detectors
    behind the same analyzer); by default every setting is its own acquisition.
    """
    if not settings:
        raise ValueError("campaign needs at least one setting")
    if acquisitions is None:
        acquisitions = list(range(len(settings)))
    if len(acquisitions) != len(settings):
        raise ValueError("one acquisition index per setting is required")
    histograms = []
    for j, acq in zip(settings, acquisitions):
        histograms.append(
            simulate_acquisition(model, j.alice, j.bob, duration_each, (campaign, acq),
                                 bob_ports=(j.bob.port,))[j.bob.port])
    logger.info(f"[campaign {campaign}] simulated {len(histograms)} histograms of {duration_each:.0f} s")
    return histograms


def run_campaign(model: ExperimentModel, settings: List[JointSetting], duration_each: float,
                 campaign: int = 0, acquisitions: Optional[List[int]] = None) -> List[MeasurementRecord]:
    if acquisitions is None:
        acquisitions = list(range(len(settings)))
    histograms = simulate_campaign(model, settings, duration_each, campaign, acquisitions)
    return [reduce_histogram(h, j, acq) for h, j, acq in zip(histograms, settings, acquisitions)]


def align_sweep_settings(model: ExperimentModel, angles: Sequence[float],
                         alice_port: Port = Port.V) -> Tuple[List[JointSetting], List[int]]:
    """
    Settings of the two-photon interference sweep over Alice's half-wave plate.

    Angle 0 is the aligned setting: Alice's detector and Bob's V detector both analyze the
    chip's |H> as seen through their fibers. Alice's QWP stays on that azimuth while her HWP
    moves by each angle, so her analyzed state sweeps a great circle through the chip H/V axis.
    Bob's H detector sits behind the same plates and analyzes the chip's |V>.
    """
    if not angles:
        raise ValueError("sweep needs at least one angle")
    h = np.array([1.0, 0.0], dtype=complex)
    aligned = settings_for_vector(model.fiber_a @ h, alice_port)
    bob_plates = settings_for_vector(model.fiber_b @ h, Port.V)

    settings, acquisitions = [], []
    for k, theta in enumerate(angles):
        alice = AnalyzerSetting(qwp_angle=aligned.qwp_angle, hwp_angle=aligned.hwp_angle + theta, port=alice_port)
        for port in model.bob_ports:
            settings.append(JointSetting(alice=alice, bob=bob_plates.with_port(port)))
            acquisitions.append(k)
    return settings, acquisitions


def build_model(overrides, seed: int = 0) -> ExperimentModel:
    """ExperimentModel from config-file overrides (degrees, ns, CAR instead of an accidental rate)."""
    a = overrides.a
    chip = werner_mixture(target_state(a, math.sqrt(max(0.0, 1.0 - a * a))), 1.0 - overrides.white_noise)
    chip = dephase(chip, overrides.coherence)
    window = (overrides.window_end_ns - overrides.window_start_ns) * 1e-9
    acc = overrides.pair_rate / (overrides.car * window) if overrides.car else 0.0
    return ExperimentModel(
        chip_state=chip,
        fiber_a=jones_from_angles(*(math.radians(v) for v in overrides.fiber_a_deg)),
        fiber_b=jones_from_angles(*(math.radians(v) for v in overrides.fiber_b_deg)),
        pair_rate=overrides.pair_rate,
        accidental_rate=acc,
        dark_rate_per_detector=overrides.dark_rate_per_detector,
        singles_rate_scale=overrides.singles_rate_scale,
        bin_width=overrides.bin_width_ps * 1e-12,
        t_max=overrides.t_max_ns * 1e-9,
        window_start=overrides.window_start_ns * 1e-9,
        window_end=overrides.window_end_ns * 1e-9,
        angle_jitter=math.radians(overrides.angle_jitter_deg),
        alice_ports=tuple(overrides.alice_ports),
        bob_ports=tuple(overrides.bob_ports),
        seed=seed,
    )
