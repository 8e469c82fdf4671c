# utils/serialization.py
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from models.experiment import Histogram
from models.records import MeasurementRecord
from utils.errors import InputFormatError
from utils.logging_setup import setup_logging

logger = setup_logging()

HISTOGRAM_HEADER = "# bin_width_s,t_i_s,t_f_s,t_max_s,duration_s,singles_A,label"

PathLike = Union[str, Path]

_write_retry = retry(
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=0.1, min=0.1, max=1),
    retry=retry_if_exception_type(OSError),
    reraise=True,
)


def dumps(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


@_write_retry
def write_text(path: PathLike, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")
    logger.debug(f"[io] wrote {p}")
    return p


def write_json(path: PathLike, data: Any) -> Path:
    return write_text(path, dumps(data))


def read_json(path: PathLike) -> Any:
    p = Path(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        logger.error(f"[io] {p}:{exc.lineno}: {exc.msg}")
        raise InputFormatError(p, exc.lineno, exc.msg) from exc


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Dict]) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(row.get(k, "")) for k in header))
    return write_text(path, "\n".join(lines) + "\n")


def _csv_cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def histogram_to_csv(h: Histogram) -> str:
    meta = [repr(float(h.bin_width)), repr(float(h.window_start)), repr(float(h.window_end)),
            repr(float(h.t_max)), repr(float(h.duration)), str(int(h.singles_a)), h.label]
    return "\n".join([HISTOGRAM_HEADER, "# " + ",".join(meta)] + [str(int(c)) for c in h.counts]) + "\n"


def write_histogram_csv(path: PathLike, h: Histogram) -> Path:
    return write_text(path, histogram_to_csv(h))


def read_histogram_csv(path: PathLike) -> Histogram:
    """
    Parse a histogram file: the header line, a '#' line of values, then one count per line.

    Raises:
        InputFormatError: with the offending file and line number.
    """
    p = Path(path)
    lines = p.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != HISTOGRAM_HEADER:
        raise InputFormatError(p, 1, f"expected header {HISTOGRAM_HEADER!r}")
    if len(lines) < 2 or not lines[1].startswith("#"):
        raise InputFormatError(p, 2, "missing metadata line")
    fields = lines[1][1:].strip().split(",", 6)
    if len(fields) != 7:
        raise InputFormatError(p, 2, f"expected 7 metadata fields, got {len(fields)}")
    try:
        bin_width, t_i, t_f, t_max, duration = (float(v) for v in fields[:5])
        singles = int(fields[5])
    except ValueError as exc:
        raise InputFormatError(p, 2, str(exc)) from exc
    counts: List[int] = []
    for lineno, raw in enumerate(lines[2:], start=3):
        text = raw.strip()
        if not text:
            continue
        try:
            counts.append(int(text))
        except ValueError as exc:
            raise InputFormatError(p, lineno, f"count {text!r} is not an integer") from exc
    try:
        return Histogram(bin_width=bin_width, counts=counts, window_start=t_i, window_end=t_f, t_max=t_max,
                         duration=duration, singles_a=singles, label=fields[6])
    except ValueError as exc:
        raise InputFormatError(p, 2, str(exc)) from exc


def write_records(path: PathLike, records: List[MeasurementRecord]) -> Path:
    return write_json(path, [r.to_json_dict() for r in records])


def read_records(path: PathLike) -> List[MeasurementRecord]:
    data = read_json(path)
    if isinstance(data, dict) and "records" in data:
        data = data["records"]
    if not isinstance(data, list):
        raise InputFormatError(path, 1, "expected a JSON array of measurement records")
    records = []
    for k, item in enumerate(data):
        try:
            records.append(MeasurementRecord.from_json_dict(item))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(path, 1, f"record {k}: {exc}") from exc
    return records

