"""Exception hierarchy shared by all modules."""


class TvInterpError(Exception):
    """Base class for library errors."""


class InvalidRange(TvInterpError, ValueError):
    pass


class DimensionMismatch(TvInterpError, ValueError):
    pass


class NotSquare(DimensionMismatch):
    pass


class NotUpperTriangular(TvInterpError, ValueError):
    pass


class SingularBlock(TvInterpError, ValueError):
    """A diagonal block could not be inverted.

    The offending block index is kept on ``index``.
    """

    def __init__(self, index, smallest_sv):
        self.index = index
        self.smallest_sv = smallest_sv
        super().__init__(
            f"diagonal block {index} is singular (smallest singular value {smallest_sv:.3e})"
        )


class NotHermitian(TvInterpError, ValueError):
    pass


class NotPSD(TvInterpError, ValueError):
    def __init__(self, min_eig, msg=None):
        self.min_eig = min_eig
        super().__init__(msg or f"matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")


class NotContractive(TvInterpError, ValueError):
    def __init__(self, index, norm, what="operator"):
        self.index = index
        self.norm = norm
        super().__init__(f"{what} at index {index} is not a contraction (norm {norm:.12g})")


class InterpolationError(TvInterpError, ValueError):
    """Raised when a matrix is required to solve the interpolation problem but does not."""


class MembershipError(TvInterpError, ValueError):
    """A parameter matrix violates the restriction constraints of the parameter set."""

    def __init__(self, msg, residuals=None):
        self.residuals = dict(residuals or {})
        super().__init__(msg)


class InvalidData(TvInterpError, ValueError):
    def __init__(self, msg, index=None):
        self.index = index
        super().__init__(msg)
