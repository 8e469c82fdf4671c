# utils/errors.py
from typing import Any, Dict, Optional


class NormalizationError(ValueError):
    """Amplitudes whose squared moduli do not sum to one."""


class PhysicalityError(ValueError):
    """Matrix that is not a valid density matrix or not a unitary Jones matrix."""


class WindowError(ValueError):
    """Coincidence window misaligned with the bins, or an empty noise region."""


class FitError(ValueError):
    """Fringe fit that cannot be solved (degenerate angles, non-positive mean level)."""


class CountsError(ValueError):
    """Count totals that are zero or mutually inconsistent."""


class ConfigError(ValueError):
    def __init__(self, message: str, diagnostics: Optional[list] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_x: Any = None, best_value: Optional[float] = None,
                 diagnostics: Optional[Dict] = None):
        super().__init__(message)
        self.best_x = best_x
        self.best_value = best_value
        self.diagnostics = diagnostics or {}


class InputFormatError(ValueError):
    """Malformed input file; the message carries file and line."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class PipelineError(RuntimeError):
    """One or more pipeline stages failed; diagnostics hold one entry per failed stage."""

    def __init__(self, message: str, diagnostics: Optional[list] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
