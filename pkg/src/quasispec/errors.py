"""Exception types raised across the package."""


class QuasispecError(Exception):
    """Base class for all package errors."""


class InvalidArgument(QuasispecError, ValueError):
    pass


class PreconditionViolation(QuasispecError):
    pass


class SpectralPointError(QuasispecError, ValueError):
    """The requested spectral parameter lies (numerically) on the spectrum."""

    def __init__(self, message, nearest_eigenvalue=None):
        super().__init__(message)
        self.nearest_eigenvalue = nearest_eigenvalue


class DegeneratePairError(QuasispecError):
    """An eigenfunction is (numerically) orthogonal to its adjoint partner.

    This is the signature of a Jordan block: the biorthonormal system and the
    similarity map built from it do not exist.
    """


class DegenerateSystemError(QuasispecError):
    pass


class ContourError(QuasispecError):
    """Argument-principle certification failed (root on or near a contour)."""


class DegeneracyWarning(UserWarning):
    pass
