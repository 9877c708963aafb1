"""Exception types shared across the package."""


class AlgebraError(Exception):
    """Base class for structured errors raised by this package."""


class NotHermitian(AlgebraError):
    pass


class NotPositiveDefinite(AlgebraError):
    pass


class NotSubalgebra(AlgebraError):
    pass


class NotProjection(AlgebraError):
    pass


class NonIntegralRank(AlgebraError):
    """An irreducible-representation rank did not round cleanly to an integer."""


class NotInvolutive(AlgebraError):
    pass


class NotAutomorphism(AlgebraError):
    pass


class NotPartition(AlgebraError):
    pass


class ExpectationInvalid(AlgebraError):
    """A conditional-expectation axiom failed; carries the validation report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IndexInfinite(AlgebraError):
    """The frame operator of the expectation is singular: no quasi-basis exists."""


class IndexNotTwo(AlgebraError):
    """The Watatani index is central but not the scalar 2; carries the actual index."""

    def __init__(self, message, index_value=None):
        super().__init__(message)
        self.index_value = index_value


class BetaNotAutomorphism(AlgebraError):
    pass


class QNotProjection(AlgebraError):
    pass


class IsoResidualExceeded(AlgebraError):
    """A constructed isomorphism failed its verification residuals."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotInAlgebra(AlgebraError):
    pass


class NotTwoZInner(AlgebraError):
    pass


class TraceNotFaithful(AlgebraError):
    pass


class ParseError(AlgebraError):
    pass


class DimensionMismatch(AlgebraError):
    pass
