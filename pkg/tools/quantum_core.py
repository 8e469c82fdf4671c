# tools/quantum_core.py
"""
Two-qubit polarization algebra.

Basis ordering is fixed to (|HH>, |HV>, |VH>, |VV>); the first tensor slot is
Alice (signal photon), the second is Bob (idler photon).
"""
from typing import Dict, Optional, Tuple

import numpy as np

from utils.errors import NormalizationError
from utils.logging_setup import setup_logging
from utils.validation import hermitize, validate_density_matrix, validate_jones, validate_pure_state

logger = setup_logging()

BASIS_LABELS = ["HH", "HV", "VH", "VV"]
AMPLITUDE_TOL = 1e-9
EIGENVALUE_FLOOR = 1e-13

SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_YY = np.kron(SIGMA_Y, SIGMA_Y)
FLIP_X = np.array([[0, 1], [1, 0]], dtype=complex)


def target_state(a: float, b: float) -> np.ndarray:
    """
    Return the amplitudes of a|HH> + b|VV>.

    Args:
        a (float): Real amplitude of |HH>, a >= 0.
        b (float): Real amplitude of |VV>, b >= 0.

    Returns:
        np.ndarray: Complex vector (a, 0, 0, b).

    Raises:
        NormalizationError: a or b negative, or a^2 + b^2 != 1 within 1e-9.
    """
    if a < 0 or b < 0:
        raise NormalizationError(f"Amplitudes must be non-negative, got a={a}, b={b}")
    norm = a * a + b * b
    if abs(norm - 1.0) > AMPLITUDE_TOL:
        logger.error(f"target_state rejected: a^2 + b^2 = {norm}")
        raise NormalizationError(f"a^2 + b^2 = {norm} != 1")
    return np.array([a, 0.0, 0.0, b], dtype=complex)


def projector(psi) -> np.ndarray:
    v = validate_pure_state(psi)
    return np.outer(v, v.conj())


def phi_plus() -> np.ndarray:
    return projector(target_state(1 / np.sqrt(2), 1 / np.sqrt(2)))


def maximally_mixed() -> np.ndarray:
    return np.eye(4, dtype=complex) / 4


def werner_mixture(psi, visibility: float) -> np.ndarray:
    """v|psi><psi| + (1 - v) I/4."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    return visibility * projector(psi) + (1.0 - visibility) * maximally_mixed()


def dephase(rho, coherence: float) -> np.ndarray:
    """Product-basis dephasing: every off-diagonal element of rho scaled by `coherence`."""
    if not 0.0 <= coherence <= 1.0:
        raise ValueError(f"coherence must lie in [0, 1], got {coherence}")
    r = np.asarray(rho, dtype=complex)
    diagonal = np.diag(np.diag(r))
    return coherence * r + (1.0 - coherence) * diagonal


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(rho))
    # eigenvalues under the floor are round-off of a rank-deficient matrix
    w = np.where(w > EIGENVALUE_FLOOR, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """
    Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Computed as the squared nuclear norm of sqrt(rho) sqrt(sigma), which is the same
    number for both argument orders. Both arguments are validated as density matrices;
    the result is clipped to [0, 1].
    """
    r = validate_density_matrix(rho, "rho")
    s = validate_density_matrix(sigma, "sigma")
    singular = np.linalg.svd(_psd_sqrt(r) @ _psd_sqrt(s), compute_uv=False)
    value = float(np.sum(singular) ** 2)
    return min(max(value, 0.0), 1.0)


def apply_local_rotation(rho, j_a, j_b) -> np.ndarray:
    """(J_A ⊗ J_B) rho (J_A ⊗ J_B)^dagger for unitary Jones matrices."""
    r = validate_density_matrix(rho, "rho")
    u = np.kron(validate_jones(j_a, "J_A"), validate_jones(j_b, "J_B"))
    return hermitize(u @ r @ u.conj().T)


def concurrence(rho) -> float:
    """
    Wootters concurrence.

    The square roots of the eigenvalues of rho·rho~ are taken as the singular values of
    sqrt(rho)·sqrt(rho~), which keeps the vanishing ones at round-off level for pure states.
    """
    r = validate_density_matrix(rho, "rho")
    sr = _psd_sqrt(r)
    sr_tilde = SIGMA_YY @ sr.conj() @ SIGMA_YY
    lambdas = np.linalg.svd(sr @ sr_tilde, compute_uv=False)
    lambdas = np.sort(lambdas)[::-1]
    return float(max(0.0, lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]))


def purity(rho) -> float:
    r = validate_density_matrix(rho, "rho")
    return float(np.real(np.trace(r @ r)))


def partial_trace(rho, keep: str = "A") -> np.ndarray:
    """Reduced 2x2 state of Alice ("A") or Bob ("B")."""
    r = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    if keep == "A":
        return np.einsum("ijkj->ik", r)
    if keep == "B":
        return np.einsum("jijk->ik", r)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def jones_from_angles(phi: float, theta: float, psi: float) -> np.ndarray:
    """SU(2) element [[cos t e^{i phi}, sin t e^{i psi}], [-sin t e^{-i psi}, cos t e^{-i phi}]]."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([
        [c * np.exp(1j * phi), s * np.exp(1j * psi)],
        [-s * np.exp(-1j * psi), c * np.exp(-1j * phi)],
    ], dtype=complex)


def angles_from_jones(j) -> Tuple[float, float, float]:
    """Inverse of jones_from_angles after stripping the global phase."""
    m = validate_jones(j)
    m = m / np.sqrt(np.linalg.det(m))
    theta = float(np.arctan2(abs(m[0, 1]), abs(m[0, 0])))
    phi = float(np.angle(m[0, 0])) if abs(m[0, 0]) > 1e-12 else 0.0
    psi = float(np.angle(m[0, 1])) if abs(m[0, 1]) > 1e-12 else 0.0
    return phi, theta, psi


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 2x2 unitary (QR of a complex Ginibre matrix)."""
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    rank = rank or 4
    g = rng.standard_normal((4, rank)) + 1j * rng.standard_normal((4, rank))
    m = g @ g.conj().T
    m = hermitize(m / np.trace(m).real)
    return m


def density_matrix_to_dict(rho) -> Dict:
    r = validate_density_matrix(rho)
    return {
        "re": r.real.tolist(),
        "im": r.imag.tolist(),
        "basis": list(BASIS_LABELS),
    }


def density_matrix_from_dict(data: Dict) -> np.ndarray:
    if data.get("basis", BASIS_LABELS) != BASIS_LABELS:
        raise ValueError(f"Unsupported basis ordering {data.get('basis')}")
    m = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    return validate_density_matrix(m)
