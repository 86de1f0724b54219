"""Exception hierarchy for the package."""


class HiseError(Exception):
    """Base class for all errors raised by hise_bem."""


class ConfigError(HiseError):
    """Invalid user-supplied parameters or configuration."""


class NumericalError(HiseError):
    """A numerical procedure failed or produced an unusable result."""


class ConvexityViolation(ConfigError):
    pass


class NonPositiveDensity(ConfigError):
    pass


class SingularPoint(NumericalError):
    """Kernel evaluated at (or too close to) its singularity."""


class ParseError(ConfigError):
    pass


class NonWatertight(ConfigError):
    pass


class DegenerateFace(ConfigError):
    pass


class OnSurface(NumericalError):
    pass


class EmptyInterior(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class NullSpaceDimensionMismatch(NumericalError):
    pass


class NonPositiveEigenvalue(NumericalError):
    pass


class NearSingularSystem(NumericalError):
    pass


class DomainError(NumericalError):
    pass


class RootNotBracketed(NumericalError):
    pass
