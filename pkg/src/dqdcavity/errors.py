"""Exception hierarchy.

Validation problems derive from :class:`ValueError` so callers that only care
about bad input can catch the builtin; numerical failures derive from
:class:`RuntimeError`.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or type invariant."""


class InvalidDriveError(ValidationError):
    """Drive settings are inconsistent (e.g. both gates driven at once)."""


class ResonanceError(ValidationError):
    """Qubit and resonator frequencies coincide; perturbation theory diverges."""


class SingularGeometryError(ValidationError):
    """Transition-line slopes make a lever-arm denominator vanish."""


class InsufficientDataError(ValidationError):
    pass


class ParseError(ValidationError):
    """A data file could not be parsed."""


class SchemaVersionError(ValidationError):
    pass


class ConvergenceError(RuntimeError):
    """A fit or an evolution did not reach its convergence criterion."""


class IntegratorError(RuntimeError):
    """Time stepping became unstable."""


class TruncationError(RuntimeError):
    """Population leaked into the top of the truncated Fock space."""
