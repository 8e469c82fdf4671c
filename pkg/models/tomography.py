# models/tomography.py
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.records import MeasurementRecord

JAMES_ORDER = ["HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
               "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL"]


class TomographySet(BaseModel):
    records: List[MeasurementRecord] = Field(..., description="One record per canonical projection pair, in order")

    @field_validator("records")
    @classmethod
    def _sixteen(cls, v: List[MeasurementRecord]) -> List[MeasurementRecord]:
        if len(v) != len(JAMES_ORDER):
            raise ValueError(f"a tomography set needs {len(JAMES_ORDER)} records, got {len(v)}")
        return v


class MleResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    rho: np.ndarray = Field(..., description="Reconstructed density matrix")
    params: List[float] = Field(..., description="Cholesky parameters of the winning start")
    objective: float = Field(..., description="Final value of the likelihood objective")
    iterations: int = Field(0, description="Iterations of the winning start")
    starts: int = Field(0, description="Number of starts run")
    converged_starts: int = Field(0, description="Starts meeting the convergence rule")
    best_start: int = Field(0, description="Index of the winning start")
    history: List[float] = Field(default_factory=list, description="Objective after each accepted iteration")


class RecoveryResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    rho_in: np.ndarray = Field(..., description="State unfolded back to the chip output")
    j_a: np.ndarray = Field(..., description="Recovered rotation of Alice's fiber")
    j_b: np.ndarray = Field(..., description="Recovered rotation of Bob's fiber")
    a: float = Field(..., description="Recovered |HH> amplitude, a >= b")
    fidelity: float = Field(..., description="Fidelity of rho_in with a|HH> + b|VV>")
    diagnostics: Dict = Field(default_factory=dict)

    @property
    def a_squared(self) -> float:
        return self.a ** 2


class TomographyReport(BaseModel):
    mode: str = Field(..., description="Counts used: raw or net")
    density_matrix: Dict = Field(..., description="Reconstructed matrix (re / im / basis)")
    chip_density_matrix: Dict = Field(..., description="Reconstruction unfolded to the chip output")
    fidelity: float = Field(..., description="Fidelity with the recovered target state")
    fidelity_maximal: float = Field(..., description="Best fidelity with a maximally entangled state")
    fidelity_truth: Optional[float] = Field(None, description="Fidelity with the simulated lab state, when known")
    a_squared: float
    jones_a_deg: List[float] = Field(..., description="phi, theta, psi of the recovered Alice rotation (degrees)")
    jones_b_deg: List[float] = Field(..., description="phi, theta, psi of the recovered Bob rotation (degrees)")
    concurrence: float
    purity: float
    clamped: List[str] = Field(default_factory=list, description="Settings whose negative counts were set to 0")
    diagnostics: Dict = Field(default_factory=dict)
