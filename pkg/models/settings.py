# models/settings.py
import math
import re
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator


class Port(str, Enum):
    H = "H"
    V = "V"

    @property
    def other(self) -> "Port":
        return Port.V if self is Port.H else Port.H


def canonical_angle(angle: float) -> float:
    """Map a plate angle to [0, pi); waveplate matrices have period pi."""
    value = math.fmod(angle, math.pi)
    if value < 0:
        value += math.pi
    if value >= math.pi:
        value = 0.0
    return value


class AnalyzerSetting(BaseModel):
    model_config = ConfigDict(frozen=True)

    qwp_angle: float = Field(..., description="Quarter-wave plate fast-axis angle (radians, canonical [0, pi))")
    hwp_angle: float = Field(..., description="Half-wave plate fast-axis angle (radians, canonical [0, pi))")
    port: Port = Field(Port.H, description="PBS output the detector sits on")

    @field_validator("qwp_angle", "hwp_angle")
    @classmethod
    def _canonical(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError(f"plate angle must be finite, got {v}")
        return canonical_angle(v)

    @classmethod
    def from_degrees(cls, qwp_deg: float, hwp_deg: float, port: str = "H") -> "AnalyzerSetting":
        return cls(qwp_angle=math.radians(qwp_deg), hwp_angle=math.radians(hwp_deg), port=Port(port))

    def to_json_dict(self) -> dict:
        return {"qwp_deg": math.degrees(self.qwp_angle), "hwp_deg": math.degrees(self.hwp_angle),
                "port": self.port.value}

    @classmethod
    def from_json_dict(cls, data: dict) -> "AnalyzerSetting":
        return cls.from_degrees(float(data["qwp_deg"]), float(data["hwp_deg"]), data.get("port", "H"))

    def with_port(self, port: Port) -> "AnalyzerSetting":
        return self.model_copy(update={"port": port})

    @property
    def label(self) -> str:
        return f"qwp={math.degrees(self.qwp_angle):.12f},hwp={math.degrees(self.hwp_angle):.12f},{self.port.value}"


_LABEL_RE = re.compile(
    r"^A\(qwp=(?P<aq>[-+0-9.eE]+),hwp=(?P<ah>[-+0-9.eE]+),(?P<ap>[HV])\)"
    r"B\(qwp=(?P<bq>[-+0-9.eE]+),hwp=(?P<bh>[-+0-9.eE]+),(?P<bp>[HV])\)$"
)


class JointSetting(BaseModel):
    model_config = ConfigDict(frozen=True)

    alice: AnalyzerSetting = Field(..., description="Alice's (signal) analyzer")
    bob: AnalyzerSetting = Field(..., description="Bob's (idler) analyzer")

    @property
    def channel(self) -> str:
        return f"A{self.alice.port.value}B{self.bob.port.value}"

    @property
    def label(self) -> str:
        return f"A({self.alice.label})B({self.bob.label})"

    @classmethod
    def from_label(cls, label: str) -> "JointSetting":
        match = _LABEL_RE.match(label.strip())
        if not match:
            raise ValueError(f"Unparseable joint-setting label: {label!r}")
        g = match.groupdict()
        return cls(
            alice=AnalyzerSetting.from_degrees(float(g["aq"]), float(g["ah"]), g["ap"]),
            bob=AnalyzerSetting.from_degrees(float(g["bq"]), float(g["bh"]), g["bp"]),
        )

    def to_json_dict(self) -> dict:
        return {"alice": self.alice.to_json_dict(), "bob": self.bob.to_json_dict()}

    @classmethod
    def from_json_dict(cls, data: dict) -> "JointSetting":
        return cls(alice=AnalyzerSetting.from_json_dict(data["alice"]),
                   bob=AnalyzerSetting.from_json_dict(data["bob"]))
