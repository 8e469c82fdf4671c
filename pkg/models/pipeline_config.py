# models/pipeline_config.py
import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, field_validator

from config.config import DEFAULT_COUNTS_MODE, DEFAULT_OUTPUT_DIR, DEFAULT_SEED
from models.experiment import ExperimentModel
from models.settings import Port
from utils.errors import ConfigError
from utils.logging_setup import setup_logging

logger = setup_logging()

Campaign = Literal["visibility-sweep", "tomography", "chsh", "full"]
CountsMode = Literal["raw", "net"]


class ModelOverrides(BaseModel):
    """Bench description in config-file units (degrees, ns); unset fields keep the reference values."""

    a: float = Field(math.sqrt(0.6), description="|HH> amplitude of the chip state")
    white_noise: float = Field(0.0, ge=0.0, le=1.0, description="Weight of I/4 mixed into the chip state")
    coherence: float = Field(0.76, ge=0.0, le=1.0, description="Fraction of the HH-VV coherence the chip state keeps")
    fiber_a_deg: Tuple[float, float, float] = Field((20.0, 35.0, -15.0), description="phi, theta, psi of Alice's fiber")
    fiber_b_deg: Tuple[float, float, float] = Field((-30.0, 15.0, 40.0), description="phi, theta, psi of Bob's fiber")
    pair_rate: float = Field(0.4, ge=0.0, description="Coincidence rate at the aligned setting (Hz)")
    car: Optional[float] = Field(8.0, gt=0.0, description="CAR at the aligned setting; null for no accidentals")
    dark_rate_per_detector: float = Field(10.0, ge=0.0)
    singles_rate_scale: float = Field(4000.0, ge=0.0)
    bin_width_ps: float = Field(250.0, gt=0.0)
    window_start_ns: float = Field(0.0, ge=0.0)
    window_end_ns: float = Field(0.8, gt=0.0)
    t_max_ns: float = Field(25.0, gt=0.0)
    angle_jitter_deg: float = Field(0.0, ge=0.0, description="Uniform plate miscalibration bound per acquisition")
    alice_ports: List[Port] = Field([Port.V])
    bob_ports: List[Port] = Field([Port.H, Port.V])

    @field_validator("a")
    @classmethod
    def _amplitude(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"a must lie in [0, 1], got {v}")
        return v


class Durations(BaseModel):
    visibility: float = Field(1200.0, gt=0.0, description="Seconds per sweep point")
    tomography: float = Field(1200.0, gt=0.0, description="Seconds per tomography setting")
    chsh: float = Field(150.0, gt=0.0, description="Seconds per CHSH acquisition")


class PipelineConfig(BaseModel):
    model: Union[Literal["paper-reference"], ModelOverrides] = "paper-reference"
    campaign: Campaign = "full"
    durations: Durations = Field(default_factory=Durations)
    output_dir: str = DEFAULT_OUTPUT_DIR
    seed: int = DEFAULT_SEED
    counts_mode: CountsMode = DEFAULT_COUNTS_MODE
    sweep_step_deg: float = Field(5.0, gt=0.0, description="Alice HWP step of the visibility sweep")
    sweep_span_deg: float = Field(90.0, gt=0.0, description="Alice HWP range of the visibility sweep")

    @classmethod
    def from_file(cls, path: Union[str, Path], **overrides) -> "PipelineConfig":
        """Load a JSON config; keyword overrides (CLI flags) win over file values when not None."""
        text = Path(path).read_text(encoding="utf-8")
        try:
            config = cls.model_validate_json(text)
        except ValidationError as exc:
            raise _config_error(path, exc) from exc
        return config.with_overrides(**overrides)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        values = {k: v for k, v in overrides.items() if v is not None}
        if not values:
            return self
        try:
            return PipelineConfig.model_validate({**self.model_dump(), **values})
        except ValidationError as exc:
            raise _config_error("<flags>", exc) from exc

    def build_model(self) -> ExperimentModel:
        # Local import: experiment_sim depends on models
        from tools.experiment_sim import build_model, paper_reference_model

        if self.model == "paper-reference":
            return paper_reference_model(self.seed)
        return build_model(self.model, self.seed)

    def sweep_angles_deg(self) -> List[float]:
        n = int(math.floor(self.sweep_span_deg / self.sweep_step_deg + 1e-9))
        return [k * self.sweep_step_deg for k in range(n)]


def _config_error(source, exc: ValidationError) -> ConfigError:
    diagnostics = [{"field": ".".join(str(p) for p in err["loc"]), "message": err["msg"]} for err in exc.errors()]
    for d in diagnostics:
        logger.error(f"[config {source}] {d['field']}: {d['message']}")
    return ConfigError(f"invalid configuration in {source}", diagnostics)
