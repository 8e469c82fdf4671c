# tools/polarization_optics.py
"""
Jones calculus for the analyzer chain QWP -> HWP -> PBS.

Conventions (used everywhere in the package):
    hwp(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]
    qwp(t) = [[cos^2 t + i sin^2 t, (1 - i) sin t cos t], [(1 - i) sin t cos t, sin^2 t + i cos^2 t]]
Light crosses the QWP first, so the analyzer unitary is U = hwp(h) @ qwp(q) and the
detector behind `port` projects onto U^dagger |port>.
"""
import math
from typing import Literal

import numpy as np

from models.settings import AnalyzerSetting, JointSetting, Port
from utils.logging_setup import setup_logging
from utils.validation import hermitize, validate_density_matrix, validate_jones

logger = setup_logging()

PORT_VECTORS = {
    Port.H: np.array([1.0, 0.0], dtype=complex),
    Port.V: np.array([0.0, 1.0], dtype=complex),
}


def hwp(theta: float) -> np.ndarray:
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    off = (1 - 1j) * s * c
    return np.array([[c * c + 1j * s * s, off], [off, s * s + 1j * c * c]], dtype=complex)


def analyzer_unitary(s: AnalyzerSetting) -> np.ndarray:
    return hwp(s.hwp_angle) @ qwp(s.qwp_angle)


def analyzed_vector(s: AnalyzerSetting) -> np.ndarray:
    """Polarization state transmitted to the detector behind s.port: U^dagger |port>."""
    return analyzer_unitary(s).conj().T @ PORT_VECTORS[s.port]


def analyzer_projector(s: AnalyzerSetting) -> np.ndarray:
    v = analyzed_vector(s)
    return hermitize(np.outer(v, v.conj()))


def coincidence_probability(rho, j: JointSetting) -> float:
    """Born rule tr[rho (P_A ⊗ P_B)]."""
    r = validate_density_matrix(rho)
    op = np.kron(analyzer_projector(j.alice), analyzer_projector(j.bob))
    return float(np.clip(np.real(np.trace(r @ op)), 0.0, 1.0))


def singles_probability(rho, s: AnalyzerSetting, arm: Literal["A", "B"] = "A") -> float:
    r = validate_density_matrix(rho)
    p = analyzer_projector(s)
    if arm == "A":
        op = np.kron(p, np.eye(2))
    elif arm == "B":
        op = np.kron(np.eye(2), p)
    else:
        raise ValueError(f"arm must be 'A' or 'B', got {arm!r}")
    return float(np.clip(np.real(np.trace(r @ op)), 0.0, 1.0))


def settings_for_vector(v, port: Port = Port.H) -> AnalyzerSetting:
    """
    Waveplate angles whose detector behind `port` projects onto |v><v|.

    The QWP fast axis is put on the azimuth of the polarization ellipse of v, which turns v
    into a linear state at angle alpha; the HWP at alpha/2 (H port) or (alpha + pi/2)/2 (V port)
    then maps it onto the port.
    """
    vec = np.asarray(v, dtype=complex).reshape(2)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ValueError("Cannot analyze onto a zero vector")
    vec = vec / norm
    s1 = abs(vec[0]) ** 2 - abs(vec[1]) ** 2
    s2 = 2 * np.real(np.conj(vec[0]) * vec[1])
    azimuth = 0.5 * math.atan2(s2, s1) if abs(s1) + abs(s2) > 1e-15 else 0.0
    w = qwp(azimuth) @ vec
    k = int(np.argmax(np.abs(w)))
    w = w * np.conj(w[k]) / abs(w[k])
    alpha = math.atan2(w[1].real, w[0].real)
    if port is Port.H:
        h = alpha / 2
    else:
        h = (alpha + math.pi / 2) / 2
    return AnalyzerSetting(qwp_angle=azimuth, hwp_angle=h, port=port)


def linear_setting(alpha: float, port: Port = Port.H) -> AnalyzerSetting:
    """Analyzer whose `port` detector projects onto linear polarization at angle alpha."""
    return settings_for_vector(np.array([math.cos(alpha), math.sin(alpha)]), port)


def complement_setting(s: AnalyzerSetting) -> AnalyzerSetting:
    """Same port, HWP rotated by 45 degrees: projects onto the orthogonal state."""
    return s.model_copy(update={"hwp_angle": (s.hwp_angle + math.pi / 4) % math.pi})


def to_lab_setting(fiber, s: AnalyzerSetting) -> AnalyzerSetting:
    """
    Setting that, after the fiber rotation, analyzes the chip-frame state selected by s.

    A chip-frame vector v reaches the analyzer as fiber @ v, so the lab analyzer must project
    onto fiber @ analyzed_vector(s).
    """
    f = validate_jones(fiber, "fiber")
    return settings_for_vector(f @ analyzed_vector(s), s.port)


def to_lab_joint(fiber_a, fiber_b, j: JointSetting) -> JointSetting:
    return JointSetting(alice=to_lab_setting(fiber_a, j.alice), bob=to_lab_setting(fiber_b, j.bob))
