# pipelines/analysis.py
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from models.chsh import ChshSettingPair
from models.records import MeasurementRecord
from models.tomography import TomographySet
from tools.bell_chsh import chsh_from_records
from tools.coincidence_analysis import constructive_car, reduce_histogram, visibility_report
from tools.quantum_core import density_matrix_from_dict
from tools.tomography import density_matrix_bars, tomography_report
from utils.errors import InputFormatError
from utils.logging_setup import setup_logging
from utils.serialization import read_histogram_csv, read_json, write_csv, write_json

logger = setup_logging()

VISIBILITY_CSV_HEADER = ["theta_deg", "channel", "n_raw", "n_net", "fit_raw", "fit_net", "singles_A"]
BARS_CSV_HEADER = ["i", "j", "re", "im"]


def load_inputs(paths: Sequence[str]) -> Tuple[List[MeasurementRecord], Dict]:
    """
    Records from a campaign JSON or from histogram CSV files.

    Returns:
        tuple: (records, campaign metadata; empty for CSV inputs)
    """
    if not paths:
        raise ValueError("no input files")
    suffixes = {Path(p).suffix.lower() for p in paths}
    if suffixes == {".json"}:
        if len(paths) != 1:
            raise ValueError("pass a single campaign JSON")
        data = read_json(paths[0])
        meta = data if isinstance(data, dict) else {}
        items = data.get("records") if isinstance(data, dict) else data
        if not isinstance(items, list):
            raise InputFormatError(paths[0], 1, "expected a JSON array of records or a campaign object")
        records = []
        for k, item in enumerate(items):
            try:
                records.append(MeasurementRecord.from_json_dict(item))
            except (KeyError, TypeError, ValueError) as exc:
                raise InputFormatError(paths[0], 1, f"record {k}: {exc}") from exc
        return records, meta
    if suffixes == {".csv"}:
        records = []
        for p in paths:
            h = read_histogram_csv(p)
            try:
                records.append(reduce_histogram(h))
            except ValueError as exc:
                raise InputFormatError(p, 2, str(exc)) from exc
        return records, {}
    raise ValueError(f"inputs must be all .json or all .csv, got {sorted(suffixes)}")


def analyze_visibility(records: List[MeasurementRecord], out_dir: Path) -> Dict:
    report = visibility_report(records)
    singles = {round(p["theta_deg"], 9): p["singles_A"] for p in report.singles_points}
    rows = []
    for ch in report.channels:
        for point in ch.points:
            theta = math.radians(point["theta_deg"])
            rows.append({
                "theta_deg": point["theta_deg"],
                "channel": ch.channel,
                "n_raw": point["n_raw"],
                "n_net": point["n_net"],
                "fit_raw": _fringe_value(ch.raw_fit, theta),
                "fit_net": _fringe_value(ch.net_fit, theta),
                "singles_A": singles.get(round(point["theta_deg"], 9), ""),
            })
    payload = {
        "channels": [ch.model_dump(exclude={"raw_fit", "net_fit"}) for ch in report.channels],
        "fits": {ch.channel: {"raw": ch.raw_fit.model_dump(), "net": ch.net_fit.model_dump()}
                 for ch in report.channels},
        "singles_visibility": report.singles.visibility if report.singles else None,
        "car": constructive_car(report, records),
    }
    write_json(out_dir / "visibility_report.json", payload)
    write_csv(out_dir / "visibility_curve.csv", VISIBILITY_CSV_HEADER, rows)
    logger.info(f"[visibility] report written to {out_dir}")
    return payload


def _fringe_value(fit, theta: float) -> float:
    return fit.mean_level * (1 + fit.visibility * math.cos(fit.harmonic * theta + fit.phase))


def analyze_tomography(records: List[MeasurementRecord], out_dir: Path, mode: str = "net",
                       truth: Optional[Dict] = None) -> Dict:
    report = tomography_report(TomographySet(records=records), mode,
                               truth=density_matrix_from_dict(truth) if truth else None)
    payload = report.model_dump()
    write_json(out_dir / f"tomography_report_{mode}.json", payload)
    write_csv(out_dir / f"tomography_bars_{mode}.csv", BARS_CSV_HEADER,
              density_matrix_bars(density_matrix_from_dict(report.density_matrix)))
    write_csv(out_dir / f"tomography_bars_chip_{mode}.csv", BARS_CSV_HEADER,
              density_matrix_bars(density_matrix_from_dict(report.chip_density_matrix)))
    logger.info(f"[tomography] {mode} report written to {out_dir}")
    return payload


def analyze_chsh(records: List[MeasurementRecord], out_dir: Path, mode: str = "net",
                 settings: Optional[Dict] = None, truth: Optional[Dict] = None) -> Dict:
    pair = ChshSettingPair.from_json_dict(settings) if settings else None
    rho = density_matrix_from_dict(truth) if truth else None
    payload = chsh_from_records(records, mode, pair, rho).to_json_dict()
    write_json(out_dir / f"chsh_report_{mode}.json", payload)
    logger.info(f"[chsh] {mode} report written to {out_dir}")
    return payload


def analyze(kind: str, paths: Sequence[str], out_dir: Path, mode: str = "net") -> Dict:
    records, meta = load_inputs(paths)
    if kind == "visibility":
        return analyze_visibility(records, out_dir)
    if kind == "tomography":
        return analyze_tomography(records, out_dir, mode, meta.get("truth"))
    if kind == "chsh":
        return analyze_chsh(records, out_dir, mode, meta.get("chsh_settings"), meta.get("truth"))
    raise ValueError(f"kind must be visibility, tomography or chsh, got {kind!r}")
