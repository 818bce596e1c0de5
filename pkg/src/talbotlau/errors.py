"""Exception hierarchy. The CLI maps each branch to its own exit code."""


class TalbotLauError(Exception):
    """Base class for all package errors."""


class ConfigError(TalbotLauError):
    """Invalid or incomplete scenario configuration."""


class DomainError(TalbotLauError, ValueError):
    """Input outside the physical or mathematical domain of an operation."""


class DesignError(DomainError):
    """A geometry cannot be designed for the requested resonance family."""


class NonResonantError(DomainError):
    """Setup geometry does not satisfy an integer resonance order."""


class FitDegenerateError(DomainError):
    """Least-squares objective is flat; the displacement is not identifiable."""


class InfiniteUncertaintyError(DomainError):
    """Zero contrast or zero displacement; the relative uncertainty diverges."""


class UnsupportedRegimeError(DomainError):
    """Requested physics is outside what the chosen model can describe."""


class StatisticsError(TalbotLauError):
    """Too few Monte Carlo counts for a meaningful estimate."""
