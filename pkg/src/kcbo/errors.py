"""Exception hierarchy shared by every kcbo module."""

from __future__ import annotations


class KCBOError(Exception):
    """Base class for all kcbo errors."""


class UnknownObjectiveError(KCBOError, NameError):
    """Requested objective name is not in the shipped zoo."""


class DimensionError(KCBOError, ValueError):
    pass


class ParameterError(KCBOError, ValueError):
    """A KineticParams field violates its invariants."""


class EmptyEnsembleError(KCBOError, ValueError):
    pass


class NumericalError(KCBOError, ArithmeticError):
    pass


class ShapeMismatchError(KCBOError, ValueError):
    pass


class AdmissibilityError(KCBOError, ValueError):
    """A structural precondition (coercivity, positivity of a weight) fails."""


class InsufficientDataError(KCBOError, ValueError):
    pass


class BlowupError(KCBOError, FloatingPointError):
    """Non-finite state produced by the integrator.

    Attributes
    ----------
    step : int
        Index of the step that produced the non-finite entry (1-based).
    time : float
        Simulation time at which the step ended.
    """

    def __init__(self, step: int, time: float, message: str = ""):
        self.step = int(step)
        self.time = float(time)
        super().__init__(message or f"non-finite state at step {self.step} (t={self.time:.6g})")


class NoAdmissibleParams(KCBOError):
    """Parameter search exhausted its budget without a passing set.

    ``best_report`` holds the near-miss report with the largest minimum margin,
    or ``None`` when nothing was evaluated.
    """

    def __init__(self, message: str, best_report=None):
        super().__init__(message)
        self.best_report = best_report
