# models/chsh.py
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from models.settings import AnalyzerSetting
from tools.polarization_optics import analyzer_projector


class ChshSettingPair(BaseModel):
    alice: List[AnalyzerSetting] = Field(..., description="A1, A2")
    bob: List[AnalyzerSetting] = Field(..., description="B1, B2")

    @field_validator("alice", "bob")
    @classmethod
    def _two_each(cls, v: List[AnalyzerSetting]) -> List[AnalyzerSetting]:
        if len(v) != 2:
            raise ValueError(f"each arm needs exactly two settings, got {len(v)}")
        return v

    @model_validator(mode="after")
    def _distinct_combinations(self):
        for arm, (first, second) in (("alice", self.alice), ("bob", self.bob)):
            if np.allclose(analyzer_projector(first), analyzer_projector(second), atol=1e-12):
                raise ValueError(f"both {arm} settings analyze the same polarization; the four joint "
                                 f"combinations must be distinct")
        return self

    def combinations(self):
        """(A1,B1), (A1,B2), (A2,B1), (A2,B2), the order S sums them in."""
        return [(self.alice[i], self.bob[j]) for i in range(2) for j in range(2)]

    def to_json_dict(self) -> Dict:
        return {"alice": [s.to_json_dict() for s in self.alice], "bob": [s.to_json_dict() for s in self.bob]}

    @classmethod
    def from_json_dict(cls, data: Dict) -> "ChshSettingPair":
        return cls(alice=[AnalyzerSetting.from_json_dict(s) for s in data["alice"]],
                   bob=[AnalyzerSetting.from_json_dict(s) for s in data["bob"]])


class CorrelatorCounts(BaseModel):
    """Counts N_ij (Alice outcome i, Bob outcome j) of one joint combination, with variances."""

    n00: float
    n01: float
    n10: float
    n11: float
    var00: Optional[float] = None
    var01: Optional[float] = None
    var10: Optional[float] = None
    var11: Optional[float] = None

    @model_validator(mode="after")
    def _fill_variances(self):
        # Poisson default: variance equals the count
        for key in ("00", "01", "10", "11"):
            if getattr(self, f"var{key}") is None:
                setattr(self, f"var{key}", max(getattr(self, f"n{key}"), 0.0))
        return self

    @property
    def total(self) -> float:
        return self.n00 + self.n01 + self.n10 + self.n11

    def scaled(self, factor: float) -> "CorrelatorCounts":
        return CorrelatorCounts(
            n00=self.n00 * factor, n01=self.n01 * factor, n10=self.n10 * factor, n11=self.n11 * factor,
            var00=self.var00 * factor, var01=self.var01 * factor,
            var10=self.var10 * factor, var11=self.var11 * factor,
        )


class ChshResult(BaseModel):
    settings: Optional[ChshSettingPair] = None
    e_values: List[float] = Field(..., description="E(A1B1), E(A1B2), E(A2B1), E(A2B2)")
    s: float
    sigma_s: float
    violation_sigmas: float = Field(..., description="(S - 2) / sigma_S")
    mode: str = Field("net", description="Counts used: raw or net")
    predicted_s: Optional[float] = Field(None, description="Born-rule S of the simulated state at these settings")
    counts: List[CorrelatorCounts] = Field(default_factory=list)

    @field_validator("e_values")
    @classmethod
    def _four_bounded(cls, v: List[float]) -> List[float]:
        if len(v) != 4:
            raise ValueError(f"need four correlators, got {len(v)}")
        for e in v:
            if abs(e) > 1 + 1e-12:
                raise ValueError(f"correlator {e} outside [-1, 1]")
        return v

    @field_validator("sigma_s")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("sigma_S must be >= 0")
        return v

    def to_json_dict(self) -> Dict:
        return {
            "settings": self.settings.to_json_dict() if self.settings else None,
            "E": self.e_values,
            "S": self.s,
            "sigma_S": self.sigma_s,
            "violation_sigmas": self.violation_sigmas,
            "mode": self.mode,
            "predicted_S": self.predicted_s,
            "counts": [c.model_dump() for c in self.counts],
        }
