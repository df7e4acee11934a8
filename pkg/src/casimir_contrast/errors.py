"""Exception hierarchy shared by all modules."""


class CasimirError(Exception):
    """Base class for all package errors."""


class DomainError(CasimirError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class StaticDivergence(DomainError):
    """Undamped Drude model evaluated at zero frequency."""


class TableRange(DomainError):
    """Tabulated dielectric data queried outside its extrapolation policy."""


class NoPlasmaFrequency(DomainError):
    """The material model has no plasma frequency."""


class ConvergenceFailure(CasimirError):
    """A quadrature or kernel evaluation did not reach its tolerance."""


class IllConditioned(CasimirError):
    """A linear system used for coefficient extraction is too ill-conditioned."""


class GridTooCoarse(CasimirError):
    """The z-grid does not resolve the decay length of a mode."""


class EigenFailure(CasimirError):
    """The eigensolver failed to converge."""


class BranchViolation(CasimirError):
    """An eigenvalue <= -1 makes tr ln(1 + M) ill defined."""


class ContactError(CasimirError):
    """Two surfaces touch or interpenetrate."""


class NonMonotoneConvergence(UserWarning):
    """A refinement ladder did not converge monotonically."""
