# models/records.py
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from models.settings import JointSetting


class MeasurementRecord(BaseModel):
    setting: JointSetting = Field(..., description="Analyzer settings of both arms")
    n_raw: float = Field(..., description="Coincidences integrated over [t_i, t_f)")
    n_net: float = Field(..., description="n_raw minus the accidental estimate in the window")
    tau_acc: float = Field(..., description="Accidental counts per unit delay, from the noise region")
    duration: float = Field(..., description="Acquisition time (s)")
    singles_a: int = Field(0, description="Counts on Alice's detector")
    window_length: float = Field(..., description="t_f - t_i (s)")
    noise_length: float = Field(..., description="t_max - t_f (s)")
    low_signal: bool = Field(False, description="Set when n_net < 0")
    acquisition: Optional[int] = Field(None, description="Index of the acquisition the record came from")

    @model_validator(mode="after")
    def _check_counts(self):
        if self.n_raw < 0 or self.tau_acc < 0:
            raise ValueError(f"n_raw and tau_acc must be >= 0, got {self.n_raw}, {self.tau_acc}")
        if self.n_net > self.n_raw + 1e-9:
            raise ValueError(f"n_net {self.n_net} exceeds n_raw {self.n_raw}")
        return self

    @property
    def accidentals(self) -> float:
        return self.window_length * self.tau_acc

    def to_json_dict(self) -> dict:
        data = self.model_dump(exclude={"setting"})
        data["setting"] = self.setting.to_json_dict()
        data["label"] = self.setting.label
        return data

    @classmethod
    def from_json_dict(cls, data: dict) -> "MeasurementRecord":
        payload = {k: v for k, v in data.items() if k not in ("setting", "label")}
        return cls(setting=JointSetting.from_json_dict(data["setting"]), **payload)


class FringeFit(BaseModel):
    mean_level: float = Field(..., description="c0 of c0 + c1 cos(k t) + c2 sin(k t)")
    visibility: float = Field(..., description="sqrt(c1^2 + c2^2) / c0, clamped to [0, 1]")
    phase: float = Field(..., description="phi in c0 (1 + V cos(k t + phi)) (radians)")
    residual_norm: float = Field(..., description="Euclidean norm of the fit residuals")
    harmonic: int = Field(4, description="k")


class ChannelFringe(BaseModel):
    channel: str
    visibility_raw: float
    visibility_net: float
    phase_deg: float
    raw_fit: FringeFit
    net_fit: FringeFit
    points: List[dict] = Field(default_factory=list, description="theta_deg, n_raw, n_net per sweep point")


class VisibilityReport(BaseModel):
    channels: List[ChannelFringe]
    singles: Optional[FringeFit] = None
    singles_points: List[dict] = Field(default_factory=list)

    def channel(self, name: str) -> ChannelFringe:
        for c in self.channels:
            if c.channel == name:
                return c
        raise KeyError(f"No fringe for channel {name}")
