# main.py
import functools
import json
import sys
from pathlib import Path
from typing import List, Optional

import typer

from config.config import DEFAULT_COUNTS_MODE
from models.pipeline_config import ModelOverrides, PipelineConfig
from pipelines.analysis import analyze as analyze_files
from pipelines.campaigns import simulate_campaigns
from pipelines.full_pipeline import run_pipeline
from utils.logging_setup import setup_logging
from utils.serialization import dumps, read_json

logger = setup_logging()

app = typer.Typer(add_completion=False, help="Entangled photon-pair bench: simulate, analyze, report.")

ConfigOpt = typer.Option(None, "--config", help="Pipeline configuration (JSON)")
SeedOpt = typer.Option(None, "--seed", help="Root seed of every random stream")
ModeOpt = typer.Option(None, "--mode", help="Counts used by the analyses: raw or net")
OutOpt = typer.Option(None, "--out", help="Output directory")
DryRunOpt = typer.Option(False, "--dry-run", help="Validate and plan; write nothing")


def _guarded(func):
    """Report any failure as a JSON object on stderr and exit with status 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except typer.Exit:
            raise
        except Exception as exc:
            logger.error(f"[cli] {type(exc).__name__}: {exc}")
            error = {"error": type(exc).__name__, "message": str(exc)}
            diagnostics = getattr(exc, "diagnostics", None)
            if diagnostics:
                error["diagnostics"] = diagnostics
            sys.stderr.write(json.dumps(error, sort_keys=True, default=str) + "\n")
            raise typer.Exit(code=1)

    return wrapper


def _load_config(config: Optional[Path], model: Optional[str] = None, **overrides) -> PipelineConfig:
    if model is not None and model != "paper-reference":
        overrides["model"] = ModelOverrides.model_validate(read_json(model))
    elif model == "paper-reference":
        overrides["model"] = "paper-reference"
    if config is not None:
        return PipelineConfig.from_file(config, **overrides)
    return PipelineConfig().with_overrides(**overrides)


def _emit(result) -> None:
    typer.echo(dumps(result), nl=False)


@app.command()
@_guarded
def simulate(
    config: Optional[Path] = ConfigOpt,
    campaign: Optional[str] = typer.Option(None, "--campaign", help="visibility-sweep, tomography, chsh or full"),
    model: Optional[str] = typer.Option(None, "--model", help="'paper-reference' or a JSON file of overrides"),
    seed: Optional[int] = SeedOpt,
    out: Optional[str] = OutOpt,
    dry_run: bool = DryRunOpt,
):
    """Simulate histograms for a campaign and write them with a manifest."""
    cfg = _load_config(config, model, campaign=campaign, seed=seed, output_dir=out)
    _emit(simulate_campaigns(cfg, dry_run=dry_run))


@app.command()
@_guarded
def analyze(
    inputs: List[Path] = typer.Argument(..., help="Campaign JSON or histogram CSV files"),
    kind: str = typer.Option(..., "--kind", help="visibility, tomography or chsh"),
    mode: Optional[str] = ModeOpt,
    out: Optional[str] = OutOpt,
):
    """Reduce and analyze recorded or simulated data."""
    out_dir = Path(out) if out else Path(PipelineConfig().output_dir) / "analysis"
    _emit(analyze_files(kind, [str(p) for p in inputs], out_dir, mode or DEFAULT_COUNTS_MODE))


def _single_campaign(kind: str, config, seed, mode, out, dry_run) -> None:
    cfg = _load_config(config, campaign=kind, seed=seed, counts_mode=mode, output_dir=out)
    _emit(run_pipeline(cfg, dry_run=dry_run))


@app.command()
@_guarded
def tomo(config: Optional[Path] = ConfigOpt, seed: Optional[int] = SeedOpt, mode: Optional[str] = ModeOpt,
         out: Optional[str] = OutOpt, dry_run: bool = DryRunOpt):
    """Simulate and reconstruct the 16-setting tomography campaign."""
    _single_campaign("tomography", config, seed, mode, out, dry_run)


@app.command()
@_guarded
def chsh(config: Optional[Path] = ConfigOpt, seed: Optional[int] = SeedOpt, mode: Optional[str] = ModeOpt,
         out: Optional[str] = OutOpt, dry_run: bool = DryRunOpt):
    """Simulate the three-detector CHSH run at the optimal settings."""
    _single_campaign("chsh", config, seed, mode, out, dry_run)


@app.command()
@_guarded
def visibility(config: Optional[Path] = ConfigOpt, seed: Optional[int] = SeedOpt, mode: Optional[str] = ModeOpt,
               out: Optional[str] = OutOpt, dry_run: bool = DryRunOpt):
    """Simulate the two-photon interference sweep and fit its fringes."""
    _single_campaign("visibility-sweep", config, seed, mode, out, dry_run)


@app.command()
@_guarded
def pipeline(config: Optional[Path] = ConfigOpt, seed: Optional[int] = SeedOpt, mode: Optional[str] = ModeOpt,
             out: Optional[str] = OutOpt, dry_run: bool = DryRunOpt):
    """Run every campaign and write summary.json next to the published values."""
    cfg = _load_config(config, seed=seed, counts_mode=mode, output_dir=out)
    _emit(run_pipeline(cfg, dry_run=dry_run))


if __name__ == "__main__":
    app()
