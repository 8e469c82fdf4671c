# tools/tomography.py
"""
Sixteen-setting state tomography.

The counts of the canonical projection pairs are inverted linearly, refined by a
maximum-likelihood fit over a Cholesky parameterization rho = T^dagger T / tr(T^dagger T)
with T lower triangular, and the result is unfolded back to the chip output by
maximizing the fidelity with a|HH> + b|VV> over local Jones rotations.
"""
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from models.records import MeasurementRecord
from models.settings import JointSetting, Port
from models.tomography import (
    JAMES_ORDER,
    MleResult,
    RecoveryResult,
    TomographyReport,
    TomographySet,
)
from tools.polarization_optics import analyzer_projector, settings_for_vector
from tools.quantum_core import (
    angles_from_jones,
    apply_local_rotation,
    concurrence,
    density_matrix_to_dict,
    fidelity,
    jones_from_angles,
    purity,
    target_state,
)
from utils.errors import ConvergenceError, CountsError, PhysicalityError
from utils.logging_setup import setup_logging
from utils.validation import hermitize, validate_density_matrix

logger = setup_logging()

SQRT2 = math.sqrt(2)
POLARIZATIONS = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "D": np.array([1.0, 1.0], dtype=complex) / SQRT2,
    "R": np.array([1.0, -1j], dtype=complex) / SQRT2,
    "L": np.array([1.0, 1j], dtype=complex) / SQRT2,
}

PROJECTOR_TOL = 1e-6
PROB_FLOOR = 1e-12
MLE_STARTS = 8
MLE_PERTURBATION = 0.1
MLE_MAX_ITER = 5000
PLATEAU_ITERATIONS = 25
PLATEAU_TOL = 1e-10
RECOVERY_STARTS = 32
TIE_TOL = 1e-9

_PAULIS = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
_PAULI_BASIS = [np.kron(p, q) for p in _PAULIS for q in _PAULIS]
_LOWER = [(1, 0), (2, 1), (3, 2), (2, 0), (3, 1), (3, 0)]


def james_settings(alice_port: Port = Port.V, bob_port: Port = Port.H) -> List[JointSetting]:
    """
    The 16 canonical projection pairs (HH, HV, VV, VH, RH, ... , RL) as waveplate settings.

    Alice analyzes through her V output, the only one with a detector on the bench.
    """
    return [
        JointSetting(alice=settings_for_vector(POLARIZATIONS[pair[0]], alice_port),
                     bob=settings_for_vector(POLARIZATIONS[pair[1]], bob_port))
        for pair in JAMES_ORDER
    ]


def james_projectors() -> List[np.ndarray]:
    out = []
    for pair in JAMES_ORDER:
        v = np.kron(POLARIZATIONS[pair[0]], POLARIZATIONS[pair[1]])
        out.append(np.outer(v, v.conj()))
    return out


def _record_projector(record: MeasurementRecord) -> np.ndarray:
    return np.kron(analyzer_projector(record.setting.alice), analyzer_projector(record.setting.bob))


def set_projectors(t: TomographySet) -> List[np.ndarray]:
    """Projectors of the recorded settings; they must match the canonical pairs in order."""
    projectors = [_record_projector(r) for r in t.records]
    for name, expected, actual in zip(JAMES_ORDER, james_projectors(), projectors):
        if np.max(np.abs(expected - actual)) > PROJECTOR_TOL:
            logger.error(f"[{name}] recorded setting does not realize the {name} projection")
            raise ValueError(f"record for {name} does not analyze the {name} projection pair")
    return projectors


def tomography_counts(t: TomographySet, mode: str = "net",
                      weights: Optional[Dict[Port, float]] = None) -> Tuple[np.ndarray, List[str]]:
    """
    Count vector used by the reconstruction, with the names of the settings clamped to 0.

    Args:
        t (TomographySet): Records in canonical order.
        mode (str): "net" (accidentals subtracted) or "raw".
        weights (dict): Optional relative efficiency per Bob port; counts are divided by it.

    Returns:
        tuple: (16 counts, list of clamped setting names).
    """
    if mode not in ("raw", "net"):
        raise ValueError(f"mode must be 'raw' or 'net', got {mode!r}")
    counts = np.array([r.n_net if mode == "net" else r.n_raw for r in t.records], dtype=float)
    if weights:
        for k, r in enumerate(t.records):
            w = weights.get(r.setting.bob.port, 1.0)
            if w <= 0:
                raise ValueError(f"efficiency weight for port {r.setting.bob.port.value} must be > 0")
            counts[k] /= w
    clamped = [name for name, n in zip(JAMES_ORDER, counts) if n < 0]
    if clamped:
        logger.warning(f"Negative counts clamped to 0 for {', '.join(clamped)}")
        counts = np.clip(counts, 0.0, None)
    return counts, clamped


def count_normalization(counts: Sequence[float]) -> float:
    """N: total over the HH, HV, VV, VH records, a complete product basis."""
    total = float(np.sum(np.asarray(counts, dtype=float)[:4]))
    if total <= 0:
        logger.error("Tomography normalization is zero: no counts in the H/V basis")
        raise CountsError("no counts in the HH/HV/VV/VH records")
    return total


def _invert(counts: np.ndarray, projectors: List[np.ndarray]) -> np.ndarray:
    if np.sum(counts) <= 0:
        raise CountsError("all tomography counts are zero")
    freqs = counts / count_normalization(counts)
    design = np.array([[np.real(np.trace(b @ p)) / 4 for b in _PAULI_BASIS] for p in projectors])
    try:
        coef = np.linalg.solve(design, freqs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("tomography settings do not form an invertible set") from exc
    rho = sum(c * b for c, b in zip(coef, _PAULI_BASIS)) / 4
    trace = np.real(np.trace(rho))
    if abs(trace) < 1e-15:
        raise CountsError("linear inversion gives a zero-trace matrix")
    return hermitize(rho / trace)


def linear_inversion(t: TomographySet, mode: str = "net",
                     weights: Optional[Dict[Port, float]] = None) -> np.ndarray:
    """Hermitian, unit-trace solution of tr(rho P_nu) = n_nu / N; may have negative eigenvalues."""
    counts, _ = tomography_counts(t, mode, weights)
    return _invert(counts, set_projectors(t))


def params_to_t(x: Sequence[float]) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    t[np.diag_indices(4)] = x[:4]
    for k, (i, j) in enumerate(_LOWER):
        t[i, j] = x[4 + 2 * k] + 1j * x[5 + 2 * k]
    return t


def params_to_rho(x: Sequence[float]) -> np.ndarray:
    t = params_to_t(x)
    g = t.conj().T @ t
    trace = np.real(np.trace(g))
    if trace <= 0:
        raise PhysicalityError("Cholesky parameters describe the zero matrix")
    return hermitize(g / trace)


def rho_to_params(rho) -> np.ndarray:
    """Cholesky parameters of a full-rank density matrix (rho = T^dagger T, T lower triangular)."""
    r = validate_density_matrix(rho)
    flip = np.eye(4)[::-1]
    chol = np.linalg.cholesky(flip @ r @ flip)
    t = (flip @ chol @ flip).conj().T
    x = np.zeros(16)
    x[:4] = np.real(np.diag(t))
    for k, (i, j) in enumerate(_LOWER):
        x[4 + 2 * k] = t[i, j].real
        x[5 + 2 * k] = t[i, j].imag
    return x


def _objective(x: np.ndarray, counts: np.ndarray, norm: float, ops: np.ndarray) -> float:
    rho = params_to_rho(x)
    p = np.clip(np.real(np.einsum("kij,ji->k", ops, rho)), PROB_FLOOR, None)
    expected = norm * p
    return float(np.sum((expected - counts) ** 2 / (2 * expected)))


def _gradient(x: np.ndarray, counts: np.ndarray, norm: float, ops: np.ndarray) -> np.ndarray:
    t = params_to_t(x)
    g = t.conj().T @ t
    trace = np.real(np.trace(g))
    p = np.clip(np.real(np.einsum("kij,ji->k", ops, g)) / trace, PROB_FLOOR, None)
    dl_dp = (norm ** 2 * p ** 2 - counts ** 2) / (2 * norm * p ** 2)
    w = np.einsum("k,kij->ij", dl_dp, ops)
    a = w / trace - (np.real(np.trace(g @ w)) / trace ** 2) * np.eye(4)
    ta = 2 * (t @ a)
    grad = np.zeros(16)
    grad[:4] = np.real(np.diag(ta))
    for k, (i, j) in enumerate(_LOWER):
        grad[4 + 2 * k] = ta[i, j].real
        grad[5 + 2 * k] = ta[i, j].imag
    return grad


def _plateaued(history: List[float]) -> bool:
    if len(history) <= PLATEAU_ITERATIONS:
        return False
    return history[-PLATEAU_ITERATIONS - 1] - history[-1] < PLATEAU_TOL


def _mle_start_points(rho_lin: np.ndarray, starts: int, seed: int) -> List[np.ndarray]:
    w, v = np.linalg.eigh(rho_lin)
    psd = (v * np.clip(w, 0.0, None)) @ v.conj().T
    psd = psd / np.real(np.trace(psd))
    mixed = (1 - 1e-3) * psd + 1e-3 * np.eye(4) / 4
    x0 = rho_to_params(hermitize(mixed))
    points = [x0]
    for k in range(1, starts):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        points.append(x0 + rng.normal(0.0, MLE_PERTURBATION, size=16))
    return points


def mle_fit(t: TomographySet, mode: str = "net", weights: Optional[Dict[Port, float]] = None,
            starts: int = MLE_STARTS, seed: int = 0, gradient: str = "analytic") -> MleResult:
    """
    Maximum-likelihood reconstruction with its optimizer diagnostics.

    Minimizes sum_nu (N p_nu - n_nu)^2 / (2 N p_nu) with BFGS from the PSD-projected linear
    inversion and `starts - 1` seeded perturbations of it. The lowest objective wins; ties go to
    the earliest start. gradient="numerical" uses central finite differences instead of the
    closed-form gradient.

    Raises:
        ConvergenceError: no start reaches the iteration budget's convergence rule.
    """
    if starts < 1:
        raise ValueError("need at least one start")
    counts, clamped = tomography_counts(t, mode, weights)
    projectors = set_projectors(t)
    if np.sum(counts) <= 0:
        raise CountsError("all tomography counts are zero")
    norm = count_normalization(counts)
    ops = np.array(projectors)
    rho_lin = _invert(counts, projectors)
    jac = _gradient if gradient == "analytic" else "3-point"

    best: Optional[Tuple[float, int, np.ndarray, List[float], int]] = None
    converged_starts = 0
    for k, x0 in enumerate(_mle_start_points(rho_lin, starts, seed)):
        history = [_objective(x0, counts, norm, ops)]

        def record(xk, history=history):
            history.append(_objective(xk, counts, norm, ops))

        res = minimize(_objective, x0, args=(counts, norm, ops), method="BFGS", jac=jac,
                       callback=record, options={"gtol": 1e-10, "maxiter": MLE_MAX_ITER})
        value = float(res.fun)
        converged = bool(res.success) or res.status == 2 or _plateaued(history)
        if converged:
            converged_starts += 1
        else:
            logger.warning(f"[start {k}] BFGS stopped without converging: {res.message}")
        logger.debug(f"[start {k}] objective {value:.6g} after {res.nit} iterations")
        if not np.isfinite(value):
            continue
        if converged and (best is None or value < best[0] - 1e-15):
            best = (value, k, np.asarray(res.x), history, int(res.nit))

    if best is None:
        logger.error(f"MLE failed: none of {starts} starts converged")
        raise ConvergenceError("maximum-likelihood fit did not converge", best_x=None, best_value=None,
                               diagnostics={"starts": starts, "clamped": clamped})
    value, k, x, history, nit = best
    logger.info(f"MLE objective {value:.6g} from start {k} ({converged_starts}/{starts} converged)")
    return MleResult(rho=params_to_rho(x), params=[float(v) for v in x], objective=value,
                     iterations=nit, starts=starts, converged_starts=converged_starts,
                     best_start=k, history=history)


def mle_reconstruct(t: TomographySet, mode: str = "net",
                    weights: Optional[Dict[Port, float]] = None) -> np.ndarray:
    return mle_fit(t, mode, weights).rho


def _recovery_state(a: float) -> np.ndarray:
    return target_state(a, math.sqrt(max(0.0, 1.0 - a * a)))


def _overlap(x: np.ndarray, rho: np.ndarray, fixed_a: Optional[float]) -> float:
    j = np.kron(jones_from_angles(*x[:3]), jones_from_angles(*x[3:6]))
    a = fixed_a if fixed_a is not None else math.cos(x[6])
    psi = j @ _recovery_state(a)
    return float(np.real(psi.conj() @ rho @ psi))


def _rotation_norm(x: np.ndarray) -> float:
    eye = np.eye(2)
    return float(np.linalg.norm(jones_from_angles(*x[:3]) - eye) + np.linalg.norm(jones_from_angles(*x[3:6]) - eye))


def recover_chip_state(rho_out, fixed_a: Optional[float] = None, starts: int = RECOVERY_STARTS,
                       seed: int = 0) -> RecoveryResult:
    """
    Unfold local fiber rotations from a reconstructed state.

    Maximizes <Psi(a)| (J_A ⊗ J_B)^dagger rho_out (J_A ⊗ J_B) |Psi(a)> over three angles per
    Jones matrix and a = cos(x), x in [0, pi/4] (so a >= b), from the identity and `starts`
    seeded random points. The highest fidelity wins; candidates within 1e-9 of it are ranked by
    the distance of the rotations from the identity.

    Args:
        rho_out (np.ndarray): State measured after the fibers.
        fixed_a (float): Pin the amplitude (1/sqrt2 gives the maximally entangled target).

    Returns:
        RecoveryResult: unfolded state, rotations, amplitude and fidelity.
    """
    rho = validate_density_matrix(rho_out, "rho_out")
    diag = np.real(np.diag(rho))
    x_init = math.atan2(math.sqrt(max(diag[3], 0.0)), math.sqrt(max(diag[0], 0.0)))
    x_init = min(x_init, math.pi / 4)
    dims = 6 if fixed_a is not None else 7
    bounds = [(None, None)] * 6 + ([(0.0, math.pi / 4)] if fixed_a is None else [])

    points = [np.array([0.0] * 6 + ([x_init] if fixed_a is None else []))]
    for k in range(1, starts + 1):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        angles = rng.uniform(0.0, 2 * math.pi, size=6)
        angles[[1, 4]] = rng.uniform(0.0, math.pi / 2, size=2)
        extra = [rng.uniform(0.0, math.pi / 4)] if fixed_a is None else []
        points.append(np.concatenate([angles, extra]))

    candidates = []
    failures = 0
    for k, x0 in enumerate(points):
        res = minimize(lambda x: -_overlap(x, rho, fixed_a), x0, method="L-BFGS-B", jac="3-point",
                       bounds=bounds, options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
        value = -float(res.fun)
        if not np.isfinite(value):
            failures += 1
            logger.warning(f"[start {k}] recovery returned a non-finite fidelity")
            continue
        candidates.append((value, _rotation_norm(res.x), k, np.asarray(res.x)))
    if not candidates:
        raise ConvergenceError("fidelity maximization failed for every start",
                               diagnostics={"starts": len(points), "failures": failures})

    top = max(c[0] for c in candidates)
    value, _, k, x = min((c for c in candidates if c[0] >= top - TIE_TOL), key=lambda c: (c[1], c[2]))
    j_a, j_b = jones_from_angles(*x[:3]), jones_from_angles(*x[3:6])
    a = fixed_a if fixed_a is not None else math.cos(x[6])
    rho_in = apply_local_rotation(rho, j_a.conj().T, j_b.conj().T)
    psi = _recovery_state(a)
    f = fidelity(rho_in, np.outer(psi, psi.conj()))
    logger.info(f"Recovered a^2 = {a * a:.4f} with fidelity {f:.4f} (start {k} of {len(points)})")
    return RecoveryResult(rho_in=rho_in, j_a=j_a, j_b=j_b, a=a, fidelity=f,
                          diagnostics={"starts": len(points), "best_start": k, "failures": failures,
                                       "dimensions": dims})


def fidelity_to_maximal(rho_in) -> float:
    """Best fidelity with (|HH> + |VV>)/sqrt2 over local rotations."""
    return recover_chip_state(rho_in, fixed_a=1 / SQRT2).fidelity


def density_matrix_bars(rho) -> List[Dict]:
    """Bar-chart rows i, j, re, im for every entry of rho."""
    r = validate_density_matrix(rho)
    return [{"i": i, "j": j, "re": float(r[i, j].real), "im": float(r[i, j].imag)}
            for i in range(4) for j in range(4)]


def _jones_deg(j: np.ndarray) -> List[float]:
    return [math.degrees(v) for v in angles_from_jones(j)]


def tomography_report(t: TomographySet, mode: str = "net", weights: Optional[Dict[Port, float]] = None,
                      truth: Optional[np.ndarray] = None) -> TomographyReport:
    """Reconstruct, unfold and summarize a tomography set."""
    _, clamped = tomography_counts(t, mode, weights)
    fit = mle_fit(t, mode, weights)
    recovery = recover_chip_state(fit.rho)
    maximal = fidelity_to_maximal(fit.rho)
    return TomographyReport(
        mode=mode,
        density_matrix=density_matrix_to_dict(fit.rho),
        chip_density_matrix=density_matrix_to_dict(recovery.rho_in),
        fidelity=recovery.fidelity,
        fidelity_maximal=maximal,
        fidelity_truth=fidelity(fit.rho, truth) if truth is not None else None,
        a_squared=recovery.a_squared,
        jones_a_deg=_jones_deg(recovery.j_a),
        jones_b_deg=_jones_deg(recovery.j_b),
        concurrence=concurrence(fit.rho),
        purity=purity(fit.rho),
        clamped=clamped,
        diagnostics={
            "mle_starts": fit.starts,
            "mle_converged_starts": fit.converged_starts,
            "mle_iterations": fit.iterations,
            "mle_objective": fit.objective,
            "recovery_starts": recovery.diagnostics["starts"],
            "recovery_best_start": recovery.diagnostics["best_start"],
        },
    )
