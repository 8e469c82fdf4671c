# utils/validation.py
import numpy as np

from utils.errors import PhysicalityError, NormalizationError
from utils.logging_setup import setup_logging

logger = setup_logging()

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
UNITARY_TOL = 1e-10
NORM_TOL = 1e-12


def validate_density_matrix(rho, name: str = "rho") -> np.ndarray:
    """
    Validate a two-qubit density matrix.

    Args:
        rho (array_like): Candidate 4x4 matrix.
        name (str): Name used in log and error messages.

    Returns:
        np.ndarray: The matrix as a complex 4x4 array.

    Raises:
        PhysicalityError: wrong shape, non-Hermitian, trace != 1 or an eigenvalue below -1e-10.
    """
    m = np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        logger.error(f"[{name}] Expected a 4x4 density matrix, got shape {m.shape}")
        raise PhysicalityError(f"{name}: expected shape (4, 4), got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PhysicalityError(f"{name}: non-finite entries")
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        logger.error(f"[{name}] Matrix is not Hermitian")
        raise PhysicalityError(f"{name}: not Hermitian within {HERMITIAN_TOL}")
    trace = np.trace(m).real
    if abs(trace - 1.0) > TRACE_TOL:
        logger.error(f"[{name}] Trace {trace} differs from 1")
        raise PhysicalityError(f"{name}: trace {trace} != 1")
    min_eig = np.linalg.eigvalsh(m).min()
    if min_eig < PSD_TOL:
        logger.error(f"[{name}] Negative eigenvalue {min_eig}")
        raise PhysicalityError(f"{name}: eigenvalue {min_eig} < {PSD_TOL}")
    return m


def validate_jones(j, name: str = "J") -> np.ndarray:
    m = np.asarray(j, dtype=complex)
    if m.shape != (2, 2):
        raise PhysicalityError(f"{name}: expected shape (2, 2), got {m.shape}")
    deviation = np.max(np.abs(m.conj().T @ m - np.eye(2)))
    if deviation > UNITARY_TOL:
        logger.error(f"[{name}] Jones matrix is not unitary (deviation {deviation:.3e})")
        raise PhysicalityError(f"{name}: not unitary, |J^dag J - I| = {deviation:.3e}")
    return m


def validate_pure_state(psi, name: str = "psi") -> np.ndarray:
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if v.shape != (4,):
        raise NormalizationError(f"{name}: expected 4 amplitudes, got {v.shape[0]}")
    norm = float(np.sum(np.abs(v) ** 2))
    if abs(norm - 1.0) > NORM_TOL:
        logger.error(f"[{name}] Amplitudes not normalized (sum |c|^2 = {norm})")
        raise NormalizationError(f"{name}: sum of |amplitude|^2 = {norm} != 1")
    return v


def hermitize(m: np.ndarray) -> np.ndarray:
    """Remove the anti-Hermitian round-off left by matrix products."""
    return 0.5 * (m + m.conj().T)
