"""Exception types shared across the package."""


class DonorSpinError(Exception):
    """Base class for package errors."""


class CapacityError(DonorSpinError):
    """Requested system exceeds a hard size limit (Hilbert dimension, sites)."""


class BasisMismatchError(DonorSpinError):
    """Operands were built over different register bases."""


class SelectivityError(DonorSpinError):
    """A pulse cannot address its target selectively (bandwidth too wide)."""


class ScheduleError(DonorSpinError):
    """Sequence validation failed (overlap or synchronisation constraint)."""


class FitFailureError(DonorSpinError):
    """A least-squares fit did not converge; carries the residual report."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ConfigError(DonorSpinError):
    """Run-configuration parsing or validation failed."""
