"""Exception hierarchy.

Every failure mode of the library raises a subclass of LocalFieldError, so
callers (and the CLI) can map errors to exit codes without string matching.
"""


class LocalFieldError(Exception):
    """Base class for all library errors."""

    code = "error"


class InsufficientPrecision(LocalFieldError):
    """A requested coefficient or operation lies outside the guaranteed window."""

    code = "insufficient-precision"


class DivisionByZero(LocalFieldError):
    """Division by an exactly-zero element."""

    code = "division-by-zero"


class IndeterminateValuation(InsufficientPrecision):
    """All visible coefficients vanish but the window is exhausted."""

    code = "indeterminate-valuation"


class ReduciblePolynomial(LocalFieldError):
    """A proposed minimal polynomial has a proper factor."""

    code = "reducible-polynomial"


class IrreducibilityCheckInfeasible(LocalFieldError):
    """The brute-force factor search exceeded its budget."""

    code = "irreducibility-check-infeasible"


class NotUniformizers(LocalFieldError):
    """A proposed uniformizer system fails validation."""

    code = "not-uniformizers"

    def __init__(self, level, reason):
        self.level = level
        self.reason = reason
        super().__init__(f"level {level}: {reason}")


class CharacteristicObstruction(LocalFieldError):
    """An operation needs invertible integers that the characteristic kills."""

    code = "characteristic-obstruction"


class BasisNotFiltered(LocalFieldError):
    """A basis of an artinian quotient is not filtered by adic degree."""

    code = "basis-not-filtered"


class SingularMatrix(LocalFieldError):
    """A matrix that must be invertible is singular."""

    code = "singular-matrix"


class NotContained(LocalFieldError):
    """Lattice quotient requested for a non-nested pair."""

    code = "not-contained"


class NoCertificate(LocalFieldError):
    """An operator carries no band certificate, so refinement search is refused."""

    code = "no-certificate"


class NotCertifiable(LocalFieldError):
    """Membership certification failed (not a disproof of membership)."""

    code = "not-certifiable"

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


class NotReduced(LocalFieldError):
    """Finite-potent reduction did not reach a finite-dimensional space."""

    code = "not-reduced"


class WildRamification(LocalFieldError):
    """Kummer extension degree divisible by the characteristic."""

    code = "wild-ramification"


class UnsupportedExtension(LocalFieldError):
    """Extension kind outside the supported (unramified / tame Kummer) range."""

    code = "unsupported-extension"


class UnmappedSymbol(LocalFieldError):
    """Pullback map missing a generator or bound symbol."""

    code = "unmapped-symbol"


class FactorizationOutOfScope(LocalFieldError):
    """Denominator factorization exceeds the supported degree bounds."""

    code = "factorization-out-of-scope"


class ParseError(LocalFieldError):
    """Expression text could not be parsed."""

    code = "parse-error"

    def __init__(self, position, expected, text=None):
        self.position = position
        self.expected = expected
        msg = f"at position {position}: expected {expected}"
        if text is not None:
            msg += f" in {text!r}"
        super().__init__(msg)
