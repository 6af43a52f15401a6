"""Shared exception types."""


class ResolutionError(ValueError):
    """Grid too coarse for the requested mollifier scale."""


class StepSizeError(RuntimeError):
    """Advective CFL constraint violated in the field solver."""


class BlowUpError(RuntimeError):
    """Field norm escaped the guard band; the run left its validity window."""


class IntegrationError(RuntimeError):
    """Ensemble update produced non-finite data."""


class UndershootError(RuntimeError):
    """Field went negative beyond the tolerated band; resolution suspect."""


class AdmissibilityError(ValueError):
    """Parameter outside the window required by the active convergence regime."""


class ConfigError(ValueError):
    """Invalid experiment configuration; carries the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DumpFormatError(ValueError):
    """Snapshot file does not match the documented dump format."""


class ReplicaFailure(RuntimeError):
    """A replica run failed; carries (N, replica) context and the cause."""

    def __init__(self, message, replica=None, cause=None):
        super().__init__(message)
        self.replica = replica
        self.cause = cause
