# models/experiment.py
import math
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.settings import Port
from utils.validation import validate_density_matrix, validate_jones

BIN_ALIGN_TOL = 1e-6


class ExperimentModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    chip_state: np.ndarray = Field(..., description="Two-photon density matrix at the chip output (4x4)")
    fiber_a: np.ndarray = Field(default_factory=lambda: np.eye(2, dtype=complex),
                                description="Jones rotation between chip and Alice's analyzer")
    fiber_b: np.ndarray = Field(default_factory=lambda: np.eye(2, dtype=complex),
                                description="Jones rotation between chip and Bob's analyzer")
    pair_rate: float = Field(0.4, description="Detected coincidence rate at the aligned reference setting (Hz)")
    accidental_rate: float = Field(0.0, description="Flat accidental floor per unit acquisition time and unit delay")
    dark_rate_per_detector: float = Field(10.0, description="Dark counts per detector (Hz)")
    singles_rate_scale: float = Field(0.0, description="Alice singles rate at unit detection probability (Hz)")
    bin_width: float = Field(250e-12, description="Histogram bin width (s)")
    t_max: float = Field(25e-9, description="Largest measurable delay (s)")
    window_start: float = Field(0.0, description="t_i (s)")
    window_end: float = Field(0.8e-9, description="t_f (s)")
    angle_jitter: float = Field(0.0, description="Half-width of the uniform per-plate angle miscalibration (radians)")
    alice_ports: Tuple[Port, ...] = Field((Port.H, Port.V), description="Alice PBS outputs fitted with a detector")
    bob_ports: Tuple[Port, ...] = Field((Port.H, Port.V), description="Bob PBS outputs fitted with a detector")
    seed: int = Field(0, description="Root seed of every random stream")

    @field_validator("chip_state", mode="before")
    @classmethod
    def _check_state(cls, v):
        return validate_density_matrix(v, "chip_state")

    @field_validator("fiber_a", "fiber_b", mode="before")
    @classmethod
    def _check_fiber(cls, v):
        return validate_jones(v, "fiber")

    @field_validator("pair_rate", "accidental_rate", "dark_rate_per_detector", "singles_rate_scale", "angle_jitter")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"rates and jitter must be finite and >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def _check_timing(self):
        if self.bin_width <= 0:
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        if not 0 <= self.window_start < self.window_end <= self.t_max:
            raise ValueError(
                f"need 0 <= t_i < t_f <= t_max, got {self.window_start}, {self.window_end}, {self.t_max}")
        if abs(self.t_max / self.bin_width - round(self.t_max / self.bin_width)) > BIN_ALIGN_TOL:
            raise ValueError("t_max must be a whole number of bins")
        if abs(self.window_start / self.bin_width - round(self.window_start / self.bin_width)) > BIN_ALIGN_TOL:
            raise ValueError("t_i must sit on a bin edge")
        if not self.alice_ports or not self.bob_ports:
            raise ValueError("each arm needs at least one detector")
        return self

    @property
    def n_bins(self) -> int:
        return int(round(self.t_max / self.bin_width))

    @property
    def window_length(self) -> float:
        return self.window_end - self.window_start


class Histogram(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    bin_width: float = Field(..., description="Bin width (s)")
    counts: np.ndarray = Field(..., description="Coincidences per delay bin")
    window_start: float = Field(..., description="t_i (s)")
    window_end: float = Field(..., description="t_f (s)")
    t_max: float = Field(..., description="Largest delay (s)")
    duration: float = Field(..., description="Acquisition time (s)")
    singles_a: int = Field(0, description="Counts on Alice's detector during the acquisition")
    label: str = Field("", description="Joint-setting descriptor")

    @field_validator("counts", mode="before")
    @classmethod
    def _check_counts(cls, v):
        arr = np.asarray(v, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if np.any(arr < 0):
            raise ValueError("counts must be non-negative")
        return arr

    @model_validator(mode="after")
    def _check_length(self):
        expected = int(round(self.t_max / self.bin_width))
        if len(self.counts) != expected:
            raise ValueError(f"counts length {len(self.counts)} != t_max / bin_width = {expected}")
        return self

    @property
    def window_length(self) -> float:
        return self.window_end - self.window_start

