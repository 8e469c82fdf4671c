# pipelines/campaigns.py
"""
Campaign planning and simulation to files.

Random streams are derived from (config seed, campaign id, acquisition index); the
campaign ids below are part of the output contract.
"""
import math
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from models.chsh import ChshSettingPair
from models.experiment import ExperimentModel
from models.pipeline_config import PipelineConfig
from models.settings import JointSetting
from tools.bell_chsh import chsh_settings, lab_pair, optimal_settings
from tools.coincidence_analysis import reduce_histogram
from tools.experiment_sim import align_sweep_settings, lab_state, simulate_campaign
from tools.quantum_core import density_matrix_to_dict
from tools.tomography import james_settings
from utils.logging_setup import setup_logging
from utils.serialization import write_histogram_csv, write_json

logger = setup_logging()

CAMPAIGN_IDS = {"visibility-sweep": 1, "tomography": 2, "chsh": 3}
CAMPAIGN_ORDER = ["visibility-sweep", "tomography", "chsh"]


class CampaignPlan(BaseModel):
    kind: str
    campaign_id: int
    settings: List[JointSetting]
    acquisitions: List[int]
    duration: float = Field(..., description="Seconds per acquisition")
    chsh_pair: Optional[ChshSettingPair] = None
    predicted_s: Optional[float] = None


def campaign_kinds(campaign: str) -> List[str]:
    return list(CAMPAIGN_ORDER) if campaign == "full" else [campaign]


def plan_campaign(kind: str, model: ExperimentModel, config: PipelineConfig) -> CampaignPlan:
    """Settings, acquisition indices and duration of one campaign."""
    if kind == "visibility-sweep":
        angles = [math.radians(a) for a in config.sweep_angles_deg()]
        settings, acquisitions = align_sweep_settings(model, angles)
        duration, pair, predicted = config.durations.visibility, None, None
    elif kind == "tomography":
        settings = james_settings()
        acquisitions = list(range(len(settings)))
        duration, pair, predicted = config.durations.tomography, None, None
    elif kind == "chsh":
        chip_pair, predicted = optimal_settings(model.chip_state, seed=config.seed)
        pair = lab_pair(model, chip_pair)
        settings, acquisitions = chsh_settings(pair)
        duration = config.durations.chsh
    else:
        raise ValueError(f"unknown campaign {kind!r}")
    logger.info(f"[{kind}] {len(settings)} settings in {len(set(acquisitions))} acquisitions of {duration:.0f} s")
    return CampaignPlan(kind=kind, campaign_id=CAMPAIGN_IDS[kind], settings=settings, acquisitions=acquisitions,
                        duration=duration, chsh_pair=pair, predicted_s=predicted)


def simulate_to_files(plan: CampaignPlan, model: ExperimentModel, out_dir: Path) -> Dict:
    """
    Simulate a planned campaign, writing one histogram CSV per setting and the campaign JSON.

    Returns:
        dict: manifest entry with the written paths.
    """
    histograms = simulate_campaign(model, plan.settings, plan.duration, plan.campaign_id, plan.acquisitions)
    hist_dir = out_dir / plan.kind / "histograms"
    files = []
    records = []
    for k, (h, j, acq) in enumerate(zip(histograms, plan.settings, plan.acquisitions)):
        files.append(str(write_histogram_csv(hist_dir / f"{k:03d}.csv", h)))
        records.append(reduce_histogram(h, j, acq))
    campaign = {
        "kind": plan.kind,
        "campaign_id": plan.campaign_id,
        "seed": model.seed,
        "duration_s": plan.duration,
        "records": [r.to_json_dict() for r in records],
        "truth": density_matrix_to_dict(lab_state(model)),
        "chip_truth": density_matrix_to_dict(model.chip_state),
    }
    if plan.chsh_pair is not None:
        campaign["chsh_settings"] = plan.chsh_pair.to_json_dict()
        campaign["predicted_S_chip"] = plan.predicted_s
    campaign_path = write_json(out_dir / plan.kind / "campaign.json", campaign)
    logger.info(f"[{plan.kind}] wrote {len(files)} histograms and {campaign_path}")
    return {"kind": plan.kind, "campaign": str(campaign_path), "histograms": files}


def simulate_campaigns(config: PipelineConfig, dry_run: bool = False) -> Dict:
    """Plan (and unless dry_run, simulate) every campaign named by the config."""
    model = config.build_model()
    plans = [plan_campaign(kind, model, config) for kind in campaign_kinds(config.campaign)]
    manifest = {
        "seed": config.seed,
        "campaign": config.campaign,
        "dry_run": dry_run,
        "config": config.model_dump(mode="json"),
        "campaigns": [],
    }
    if dry_run:
        manifest["campaigns"] = [{"kind": p.kind, "settings": len(p.settings), "duration_s": p.duration}
                                 for p in plans]
        return manifest
    out_dir = Path(config.output_dir)
    for plan in plans:
        manifest["campaigns"].append(simulate_to_files(plan, model, out_dir))
    manifest["manifest"] = str(write_json(out_dir / "manifest.json", manifest))
    return manifest
