"""Exception types shared across the library."""


class LabError(Exception):
    """Base class for all errors raised by attractorlab."""


class ConfigError(LabError):
    """Malformed model or scan configuration (unknown key, bad value)."""


class DivergenceError(LabError):
    """State norm exceeded the configured escape radius during integration."""

    def __init__(self, t, state, radius):
        super().__init__(f"state norm {float(max(abs(state))):.3g} exceeded "
                         f"escape radius {radius:.3g} at t={t:.6g}")
        self.t = t
        self.state = state


class StepUnderflowError(LabError):
    """Adaptive step shrank below the minimum near a discontinuity locus."""


class LocusProximityError(LabError):
    """A point sits too close to a discontinuity locus for the operation."""


class SingularBlockError(LabError):
    """A coordinate block that must be invertible is singular at a sample."""

    def __init__(self, point, det):
        super().__init__(f"coordinate block singular (det={det:.3g}) at {point}")
        self.point = point
        self.det = det


class ConditionInconsistencyError(LabError):
    """Derived quantity requested from sup bounds that violate its premises."""


class ReductionInvalidError(LabError):
    """Orbit samples do not collapse onto a one-dimensional section map."""

    def __init__(self, residual, threshold):
        super().__init__(
            f"reduction residual {residual:.3g} exceeds threshold {threshold:.3g}; "
            "samples do not collapse onto a 1D graph")
        self.residual = residual
        self.threshold = threshold


class ResolutionTooFineError(LabError):
    """Requested cell decomposition exceeds the configured cell cap."""


class InsufficientRecurrenceError(LabError):
    """Fewer than two entries into the target ball were observed."""
