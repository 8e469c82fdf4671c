# tests/conftest.py
import math

import numpy as np
import pytest

from models.experiment import ExperimentModel, Histogram
from models.records import MeasurementRecord
from models.tomography import TomographySet
from tools.experiment_sim import paper_reference_model
from tools.polarization_optics import coincidence_probability
from tools.quantum_core import phi_plus, projector, target_state
from tools.tomography import james_settings

A_REF = math.sqrt(0.6)
B_REF = math.sqrt(0.4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def target_rho():
    return projector(target_state(A_REF, B_REF))


@pytest.fixture
def phi_plus_rho():
    return phi_plus()


@pytest.fixture
def noiseless_model(target_rho):
    """Target state, identity fibers, no accidentals, darks, singles or plate errors."""
    return ExperimentModel(chip_state=target_rho, pair_rate=1.0, accidental_rate=0.0,
                           dark_rate_per_detector=0.0, singles_rate_scale=0.0)


@pytest.fixture
def reference_model():
    return paper_reference_model(seed=7)


def make_record(setting, n_raw, n_net=None, tau_acc=0.0, singles_a=0, acquisition=None,
                window_length=0.8e-9, noise_length=24.2e-9, duration=1.0):
    return MeasurementRecord(
        setting=setting,
        n_raw=n_raw,
        n_net=n_raw if n_net is None else n_net,
        tau_acc=tau_acc,
        duration=duration,
        singles_a=singles_a,
        window_length=window_length,
        noise_length=noise_length,
        acquisition=acquisition,
    )


def make_histogram(counts, window_end=0.8e-9, window_start=0.0, bin_width=250e-12, t_max=25e-9, label=""):
    return Histogram(bin_width=bin_width, counts=counts, window_start=window_start, window_end=window_end,
                     t_max=t_max, duration=1.0, singles_a=0, label=label)


def exact_tomography_set(rho, total=1e6) -> TomographySet:
    """Born-rule counts for the canonical settings, without noise."""
    records = [make_record(j, total * coincidence_probability(rho, j)) for j in james_settings()]
    return TomographySet(records=records)


@pytest.fixture
def record_factory():
    return make_record


@pytest.fixture
def histogram_factory():
    return make_histogram


@pytest.fixture
def exact_tomography():
    return exact_tomography_set
