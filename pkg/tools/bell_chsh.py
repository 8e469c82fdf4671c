# tools/bell_chsh.py
"""
CHSH evaluation.

Outcome labels: Alice 1 is the V output of her analyzer (the one fitted with a detector),
0 the H output; Bob 0 is H and 1 is V.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.optimize import minimize

from models.chsh import ChshResult, ChshSettingPair, CorrelatorCounts
from models.experiment import ExperimentModel
from models.records import MeasurementRecord
from models.settings import AnalyzerSetting, JointSetting, Port
from tools.coincidence_analysis import net_count_variance
from tools.experiment_sim import lab_state, run_campaign
from tools.polarization_optics import (
    coincidence_probability,
    complement_setting,
    linear_setting,
    to_lab_setting,
)
from utils.errors import ConvergenceError, CountsError
from utils.logging_setup import setup_logging
from utils.validation import validate_density_matrix

logger = setup_logging()

CLASSICAL_BOUND = 2.0
TSIRELSON_BOUND = 2 * math.sqrt(2)
COUNT_TOL = 1e-9
SEARCH_STARTS = 8
# A1, A2, B1, B2 reaching 2 sqrt2 on (HH + VV)/sqrt2 with the outcome labels above
CANONICAL_ANGLES = (0.0, 3 * math.pi / 4, 3 * math.pi / 8, 5 * math.pi / 8)


def _clip_correlator(e: float) -> float:
    if abs(e) > 1.0:
        logger.warning(f"Correlator {e:.4f} outside [-1, 1] (negative net counts) clipped")
        return float(np.clip(e, -1.0, 1.0))
    return e


def correlator_full(n00: float, n01: float, n10: float, n11: float) -> float:
    """E = ((N00 + N11) - (N01 + N10)) / (N00 + N01 + N10 + N11)."""
    total = n00 + n01 + n10 + n11
    if total <= 0:
        logger.error(f"Correlator with non-positive total ({n00}, {n01}, {n10}, {n11})")
        raise CountsError("correlator needs a positive count total")
    return _clip_correlator(((n00 + n11) - (n01 + n10)) / total)


def correlator_three_detector(n_b0: float, n_b1: float, n10: float, n11: float) -> float:
    """
    E from Bob's port totals N_j^B = N_0j + N_1j and Alice's single detector.

    E = ((N_0^B - 2 N_10) - (N_1^B - 2 N_11)) / (N_0^B + N_1^B)
    """
    if n10 > n_b0 + COUNT_TOL or n11 > n_b1 + COUNT_TOL:
        logger.error(f"Inconsistent counts: N10={n10} > N0B={n_b0} or N11={n11} > N1B={n_b1}")
        raise CountsError("Alice-detector counts exceed Bob's port totals")
    total = n_b0 + n_b1
    if total <= 0:
        raise CountsError("correlator needs a positive count total")
    return _clip_correlator(((n_b0 - 2 * n10) - (n_b1 - 2 * n11)) / total)


def chsh_s(e11: float, e12: float, e21: float, e22: float) -> float:
    for e in (e11, e12, e21, e22):
        if abs(e) > 1 + 1e-12:
            raise ValueError(f"correlator {e} outside [-1, 1]")
    return e11 + e12 + e21 - e22


def sigma_correlator(c: CorrelatorCounts) -> float:
    """First-order Poisson propagation: dE/dN = (+-1 - E) / total."""
    total = c.total
    if total <= 0:
        raise CountsError("correlator needs a positive count total")
    e = ((c.n00 + c.n11) - (c.n01 + c.n10)) / total
    plus, minus = (1 - e) / total, (-1 - e) / total
    variance = plus ** 2 * (c.var00 + c.var11) + minus ** 2 * (c.var01 + c.var10)
    return math.sqrt(variance)


def sigma_s(counts: Sequence[CorrelatorCounts]) -> float:
    if len(counts) != 4:
        raise ValueError(f"need the counts of four combinations, got {len(counts)}")
    return math.sqrt(sum(sigma_correlator(c) ** 2 for c in counts))


def predicted_correlator(rho, alice: AnalyzerSetting, bob: AnalyzerSetting) -> float:
    """Born-rule E = sum_ij (-1)^(i+j) p_ij for the outcome labels of this module."""
    r = validate_density_matrix(rho)
    e = 0.0
    for i, a_port in ((0, Port.H), (1, Port.V)):
        for j, b_port in ((0, Port.H), (1, Port.V)):
            p = coincidence_probability(r, JointSetting(alice=alice.with_port(a_port), bob=bob.with_port(b_port)))
            e += (-1) ** (i + j) * p
    return e


def predicted_s(rho, pair: ChshSettingPair) -> float:
    return chsh_s(*(predicted_correlator(rho, a, b) for a, b in pair.combinations()))


def _pair_from_params(x: np.ndarray, linear_only: bool, validate: bool = True) -> ChshSettingPair:
    if linear_only:
        alice = [linear_setting(x[0], Port.V), linear_setting(x[1], Port.V)]
        bob = [linear_setting(x[2], Port.H), linear_setting(x[3], Port.H)]
    else:
        alice = [AnalyzerSetting(qwp_angle=x[0], hwp_angle=x[1], port=Port.V),
                 AnalyzerSetting(qwp_angle=x[2], hwp_angle=x[3], port=Port.V)]
        bob = [AnalyzerSetting(qwp_angle=x[4], hwp_angle=x[5], port=Port.H),
               AnalyzerSetting(qwp_angle=x[6], hwp_angle=x[7], port=Port.H)]
    if not validate:
        # trial points of the search may pass through coinciding settings
        return ChshSettingPair.model_construct(alice=alice, bob=bob)
    return ChshSettingPair(alice=alice, bob=bob)


def optimal_settings(rho, linear_only: bool = True, starts: int = SEARCH_STARTS,
                     seed: int = 0) -> Tuple[ChshSettingPair, float]:
    """
    Analyzer settings maximizing the predicted S.

    The default search runs over four linear-polarizer angles; linear_only=False searches
    both plates of all four settings. Starts are the canonical Bell angles plus `starts`
    seeded random points; the highest S wins, ties go to the earliest start. Optima whose two
    settings on one arm coincide are skipped.

    Returns:
        tuple: (ChshSettingPair, predicted S)
    """
    r = validate_density_matrix(rho)
    dims = 4 if linear_only else 8

    def negative_s(x):
        return -predicted_s(r, _pair_from_params(x, linear_only, validate=False))

    if linear_only:
        points = [np.array(CANONICAL_ANGLES)]
    else:
        plates = [linear_setting(a, port) for a, port in zip(CANONICAL_ANGLES, (Port.V, Port.V, Port.H, Port.H))]
        points = [np.array([v for s in plates for v in (s.qwp_angle, s.hwp_angle)])]
    for k in range(1, starts + 1):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        points.append(rng.uniform(0.0, math.pi, size=dims))

    best: Optional[Tuple[float, int, np.ndarray]] = None
    for k, x0 in enumerate(points):
        res = minimize(negative_s, x0, method="BFGS", options={"gtol": 1e-10, "maxiter": 2000})
        value = -float(res.fun)
        if not np.isfinite(value):
            continue
        try:
            _pair_from_params(res.x, linear_only)
        except ValidationError:
            logger.warning(f"[start {k}] optimum has coinciding settings on one arm; skipped")
            continue
        logger.debug(f"[start {k}] predicted S = {value:.6f}")
        if best is None or value > best[0] + 1e-12:
            best = (value, k, np.asarray(res.x))
    if best is None:
        raise ConvergenceError("CHSH setting search failed for every start",
                               diagnostics={"starts": len(points)})
    value, k, x = best
    logger.info(f"Optimal predicted S = {value:.4f} (start {k}, {'linear' if linear_only else 'full'} search)")
    return _pair_from_params(x, linear_only), value


def lab_pair(model: ExperimentModel, pair: ChshSettingPair) -> ChshSettingPair:
    """Chip-frame analyzers expressed as lab waveplate settings through the fibers."""
    return ChshSettingPair(alice=[to_lab_setting(model.fiber_a, s) for s in pair.alice],
                           bob=[to_lab_setting(model.fiber_b, s) for s in pair.bob])


def chsh_settings(pair: ChshSettingPair) -> Tuple[List[JointSetting], List[int]]:
    """
    Acquisitions of a three-detector CHSH run, in combination order.

    Combination c uses acquisition 2c with Alice's V output at A_i (N_1j) and acquisition 2c + 1
    with her half-wave plate turned by 45 degrees (N_0j); Bob records on both outputs each time.
    """
    settings, acquisitions = [], []
    for c, (a, b) in enumerate(pair.combinations()):
        main = a.with_port(Port.V)
        for k, alice in enumerate((main, complement_setting(main))):
            for port in (Port.H, Port.V):
                settings.append(JointSetting(alice=alice, bob=b.with_port(port)))
                acquisitions.append(2 * c + k)
    return settings, acquisitions


def chsh_counts(records: Sequence[MeasurementRecord], mode: str = "net") -> List[CorrelatorCounts]:
    """Group the 16 records of chsh_settings order into the counts of the four combinations."""
    if mode not in ("raw", "net"):
        raise ValueError(f"mode must be 'raw' or 'net', got {mode!r}")
    if len(records) != 16:
        raise CountsError(f"a CHSH run has 16 records, got {len(records)}")
    out = []
    for c in range(4):
        values, variances = {}, {}
        for k, i in ((0, 1), (1, 0)):
            for j, port in ((0, Port.H), (1, Port.V)):
                record = records[4 * c + 2 * k + j]
                if record.setting.bob.port is not port:
                    raise CountsError(f"record {4 * c + 2 * k + j} is not on Bob's {port.value} output")
                n = record.n_net if mode == "net" else record.n_raw
                if n < 0:
                    logger.warning(f"[{record.setting.label}] negative net count {n:.2f} clamped to 0")
                    n = 0.0
                values[f"n{i}{j}"] = n
                variances[f"var{i}{j}"] = net_count_variance(record) if mode == "net" else record.n_raw
        out.append(CorrelatorCounts(**values, **variances))
    return out


def chsh_from_records(records: Sequence[MeasurementRecord], mode: str = "net",
                      pair: Optional[ChshSettingPair] = None, rho=None) -> ChshResult:
    """S and sigma_S from the records of a three-detector run; N_j^B = N_0j + N_1j."""
    counts = chsh_counts(records, mode)
    e_values = []
    for c, cc in enumerate(counts):
        n_b0, n_b1 = cc.n00 + cc.n10, cc.n01 + cc.n11
        e = correlator_three_detector(n_b0, n_b1, cc.n10, cc.n11)
        logger.info(f"[combination {c}] E = {e:.4f} (N0B={n_b0:.1f}, N1B={n_b1:.1f})")
        e_values.append(e)
    s = chsh_s(*e_values)
    sigma = sigma_s(counts)
    violation = (s - CLASSICAL_BOUND) / sigma if sigma > 0 else math.inf
    logger.info(f"S = {s:.3f} +- {sigma:.3f} ({violation:.2f} sigma above 2)")
    predicted = predicted_s(rho, pair) if rho is not None and pair is not None else None
    return ChshResult(settings=pair, e_values=e_values, s=s, sigma_s=sigma, violation_sigmas=violation,
                      mode=mode, predicted_s=predicted, counts=counts)


def run_chsh(model: ExperimentModel, pair: ChshSettingPair, duration: float, mode: str = "net",
             campaign: int = 0) -> ChshResult:
    """Simulated three-detector CHSH run with lab settings `pair`."""
    if not duration > 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if Port.H not in model.bob_ports or Port.V not in model.bob_ports:
        raise ValueError("the CHSH run needs detectors on both of Bob's outputs")
    settings, acquisitions = chsh_settings(pair)
    records = run_campaign(model, settings, duration, campaign, acquisitions)
    return chsh_from_records(records, mode, pair, lab_state(model))
