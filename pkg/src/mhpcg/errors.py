"""Exception hierarchy shared by every module."""


class MHPCGError(Exception):
    """Base class for all package errors."""


class InvalidParams(MHPCGError, ValueError):
    """Distribution parameters violate the family's invariants."""


class NonFiniteDensity(MHPCGError, FloatingPointError):
    """A target log-density evaluated to NaN, or the current state has zero density."""


class MissingConditional(MHPCGError, KeyError):
    """The model backend does not provide a conditional requested by a step."""

    def __str__(self):
        return str(self.args[0]) if self.args else "missing conditional"


class TuningFailed(MHPCGError, RuntimeError):
    """Proposal scale adaptation could not bring the acceptance rate into range."""


class SpecError(MHPCGError, ValueError):
    """A sampler specification is structurally invalid."""


class UnknownSampler(MHPCGError, KeyError):
    """Requested sampler name is not in the registry."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown sampler"


class IllegalReduction(MHPCGError, ValueError):
    """A conditioning reduction asked to sample something the step does not condition on."""


class NotRedundant(MHPCGError, ValueError):
    """A trim was requested for components that a later kernel still reads."""


class IllegalTrim(NotRedundant):
    """The step kind does not allow removing the requested subset."""


class SearchExhausted(MHPCGError, RuntimeError):
    """The derivation search space is too large to explore without a parent hint."""


class DegenerateSeries(MHPCGError, ValueError):
    """A diagnostic was asked for on a series with zero variance."""


class ComponentMissing(MHPCGError, KeyError):
    """A trace lacks a requested component."""

    def __str__(self):
        return str(self.args[0]) if self.args else "component missing"


class LNotFound(MHPCGError, RuntimeError):
    """No lag up to the search limit had autocorrelation below the threshold."""


class PositivityViolation(MHPCGError, ValueError):
    """The calibrated effective area is not strictly positive."""
