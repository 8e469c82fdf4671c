# tools/coincidence_analysis.py
import math
from collections import OrderedDict
from typing import Dict, List, Optional, Sequence

import numpy as np

from models.experiment import Histogram
from models.records import ChannelFringe, FringeFit, MeasurementRecord, VisibilityReport
from models.settings import JointSetting
from utils.errors import FitError, WindowError
from utils.logging_setup import setup_logging

logger = setup_logging()

ALIGN_TOL = 1e-6


def _bin_overlap(h: Histogram, start: float, end: float) -> np.ndarray:
    """Fraction of each bin [k dt, (k+1) dt) lying inside [start, end)."""
    edges = np.arange(len(h.counts) + 1) * h.bin_width
    lo = np.clip(edges[:-1], start, end)
    hi = np.clip(edges[1:], start, end)
    frac = (hi - lo) / h.bin_width
    frac[np.abs(frac) < 1e-9] = 0.0
    frac[np.abs(frac - 1.0) < 1e-9] = 1.0
    return frac


def _check_window_start(h: Histogram) -> None:
    k = h.window_start / h.bin_width
    if abs(k - round(k)) > ALIGN_TOL:
        logger.error(f"[{h.label}] t_i = {h.window_start} is not on a bin edge (bin {h.bin_width})")
        raise WindowError(f"t_i = {h.window_start} s is not aligned to the {h.bin_width} s bins")


def integrate_window(h: Histogram) -> float:
    """
    N_raw: counts in [t_i, t_f).

    t_i must lie on a bin edge. A bin straddling t_f contributes the fraction of its
    width inside the window.
    """
    _check_window_start(h)
    weights = _bin_overlap(h, h.window_start, h.window_end)
    return float(np.dot(weights, h.counts))


def accidental_rate(h: Histogram) -> float:
    """tau_acc: counts per unit delay over (t_f, t_max]."""
    _check_window_start(h)
    noise_length = h.t_max - h.window_end
    if noise_length <= 0:
        logger.error(f"[{h.label}] Empty noise region (t_f = t_max = {h.t_max})")
        raise WindowError("noise region (t_f, t_max] is empty")
    weights = _bin_overlap(h, h.window_end, h.t_max)
    return float(np.dot(weights, h.counts)) / noise_length


def net_counts(n_raw: float, tau_acc: float, window_length: float) -> float:
    if n_raw < 0 or tau_acc < 0 or window_length < 0:
        raise ValueError(f"inputs must be >= 0, got n_raw={n_raw}, tau_acc={tau_acc}, window={window_length}")
    n_net = n_raw - window_length * tau_acc
    if n_net < 0:
        logger.warning(f"Negative net counts ({n_net:.3f}): signal below the accidental floor")
    return n_net


def car(n_raw: float, tau_acc: float, window_length: float) -> float:
    """Coincidence-to-accidental ratio N_net / (window * tau_acc); inf when no accidentals."""
    accidentals = window_length * tau_acc
    if accidentals <= 0:
        return math.inf
    value = net_counts(n_raw, tau_acc, window_length) / accidentals
    if value <= 0:
        logger.warning(f"CAR {value:.3f} <= 0: no signal above the accidental floor")
    return value


def reduce_histogram(h: Histogram, setting: Optional[JointSetting] = None,
                     acquisition: Optional[int] = None) -> MeasurementRecord:
    n_raw = integrate_window(h)
    tau = accidental_rate(h)
    n_net = net_counts(n_raw, tau, h.window_length)
    return MeasurementRecord(
        setting=setting if setting is not None else JointSetting.from_label(h.label),
        n_raw=n_raw,
        n_net=n_net,
        tau_acc=tau,
        duration=h.duration,
        singles_a=h.singles_a,
        window_length=h.window_length,
        noise_length=h.t_max - h.window_end,
        low_signal=n_net < 0,
        acquisition=acquisition,
    )


def net_count_variance(record: MeasurementRecord) -> float:
    """Poisson variance of n_net: n_raw plus window^2 * Var(tau_acc)."""
    var_tau = record.tau_acc / record.noise_length if record.noise_length > 0 else 0.0
    return record.n_raw + record.window_length ** 2 * var_tau


def fit_fringe(angles: Sequence[float], counts: Sequence[float], harmonic: int = 4) -> FringeFit:
    """
    Linear least squares of c0 + c1 cos(k t) + c2 sin(k t).

    Returns the fit as c0 (1 + V cos(k t + phi)) with V = sqrt(c1^2 + c2^2) / c0.
    """
    t = np.asarray(angles, dtype=float)
    y = np.asarray(counts, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise FitError(f"angles and counts must be 1-D of equal length, got {t.shape} and {y.shape}")
    if len(t) < 4:
        raise FitError(f"need at least 4 points, got {len(t)}")
    if harmonic < 1:
        raise FitError(f"harmonic must be >= 1, got {harmonic}")
    design = np.column_stack([np.ones_like(t), np.cos(harmonic * t), np.sin(harmonic * t)])
    if np.linalg.matrix_rank(design) < 3:
        logger.error(f"Degenerate fringe design: angles coincide modulo 2pi/{harmonic}")
        raise FitError("degenerate design matrix: angles coincide modulo the fringe period")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    c0, c1, c2 = (float(c) for c in coef)
    if c0 <= 0:
        raise FitError(f"non-positive mean level c0 = {c0}")
    amplitude = math.hypot(c1, c2)
    visibility = amplitude / c0
    if visibility > 1.0:
        logger.warning(f"Fitted visibility {visibility:.4f} > 1 clamped to 1")
        visibility = 1.0
    phase = math.atan2(-c2, c1) if amplitude > 0 else 0.0
    residual = float(np.linalg.norm(y - design @ coef))
    return FringeFit(mean_level=c0, visibility=visibility, phase=phase, residual_norm=residual,
                     harmonic=harmonic)


def visibility_report(records: List[MeasurementRecord], harmonic: int = 4) -> VisibilityReport:
    """
    Fringe fits over Alice's half-wave-plate angle for every coincidence channel,
    on raw and net counts, plus the fit of Alice's singles.
    """
    if not records:
        raise FitError("no records to analyze")
    by_channel: Dict[str, List[MeasurementRecord]] = OrderedDict()
    for r in records:
        by_channel.setdefault(r.setting.channel, []).append(r)

    channels = []
    for name, recs in by_channel.items():
        recs = sorted(recs, key=lambda r: r.setting.alice.hwp_angle)
        theta = [r.setting.alice.hwp_angle for r in recs]
        raw_fit = fit_fringe(theta, [r.n_raw for r in recs], harmonic)
        net_fit = fit_fringe(theta, [r.n_net for r in recs], harmonic)
        logger.info(f"[{name}] visibility raw {raw_fit.visibility:.3f}, net {net_fit.visibility:.3f}")
        channels.append(ChannelFringe(
            channel=name,
            visibility_raw=raw_fit.visibility,
            visibility_net=net_fit.visibility,
            phase_deg=math.degrees(net_fit.phase),
            raw_fit=raw_fit,
            net_fit=net_fit,
            points=[{"theta_deg": math.degrees(r.setting.alice.hwp_angle), "n_raw": r.n_raw, "n_net": r.n_net}
                    for r in recs],
        ))

    # one singles value per acquisition: every channel of an acquisition shares it
    singles: Dict[object, tuple] = OrderedDict()
    for r in sorted(records, key=lambda r: r.setting.alice.hwp_angle):
        key = r.acquisition if r.acquisition is not None else round(r.setting.alice.hwp_angle, 12)
        singles.setdefault(key, (r.setting.alice.hwp_angle, r.singles_a))
    singles_fit = None
    if len(singles) >= 4 and any(s for _, s in singles.values()):
        theta_s = [t for t, _ in singles.values()]
        singles_fit = fit_fringe(theta_s, [s for _, s in singles.values()], harmonic)
        logger.info(f"Singles visibility {singles_fit.visibility:.3f}")
    return VisibilityReport(
        channels=channels,
        singles=singles_fit,
        singles_points=[{"theta_deg": math.degrees(t), "singles_A": s} for t, s in singles.values()],
    )


def constructive_car(report: VisibilityReport, records: List[MeasurementRecord]) -> float:
    """
    CAR at the constructive point of the sweep: the record of the strongest net fringe whose
    angle lies nearest the fitted maximum.
    """
    if not records:
        raise ValueError("no records")
    best = max(report.channels, key=lambda c: c.net_fit.mean_level * (1 + c.net_fit.visibility))
    fit = best.net_fit
    period = 2 * math.pi / fit.harmonic
    peak = (-fit.phase / fit.harmonic) % period

    def distance(r: MeasurementRecord) -> float:
        d = (r.setting.alice.hwp_angle - peak) % period
        return min(d, period - d)

    candidates = [r for r in records if r.setting.channel == best.channel]
    if not candidates:
        raise ValueError(f"no records for channel {best.channel}")
    record = min(candidates, key=distance)
    logger.info(f"[{best.channel}] constructive point at {math.degrees(record.setting.alice.hwp_angle):.2f} deg")
    return car(record.n_raw, record.tau_acc, record.window_length)
