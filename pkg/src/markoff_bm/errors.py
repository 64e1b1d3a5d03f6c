"""Exception types shared across the package."""


class MarkoffError(Exception):
    """Base class for all package errors."""


class BoundExceeded(MarkoffError):
    """Factorization input is beyond the configured desk-scale bound."""


class BudgetExceeded(MarkoffError):
    """An enumeration would scan more residue classes or triples than allowed."""


class PrecisionInsufficient(MarkoffError):
    """A residue datum does not determine the square class it is asked about."""


class UndefinedAtPoint(MarkoffError):
    """Every representation of a Brauer class degenerates at the given point."""


class DepthCapExceeded(MarkoffError):
    """Breadth-first refinement hit its depth cap with unresolved classes."""


class NoApplicableRule(MarkoffError):
    """No closed-form local-image rule covers the requested (m, place)."""


class Inconclusive(MarkoffError):
    """A decision needs an image that is only known partially."""


class RepresentationMismatch(MarkoffError):
    """Two representations of the same Brauer class disagree at a point."""
