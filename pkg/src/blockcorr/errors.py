"""Exception hierarchy shared by all modules."""


class BlockCorrError(Exception):
    """Base class for every error raised by :mod:`blockcorr`."""


class PositivityError(BlockCorrError):
    """A covariance sequence does not define a positive definite process."""


class SingularBlockError(BlockCorrError):
    """A sample diagonal block is too ill-conditioned to be normalized."""


class DomainError(BlockCorrError, ValueError):
    """An argument lies outside the domain of the requested function."""


class GridError(BlockCorrError, ValueError):
    """A quadrature grid is too coarse for the requested Toeplitz size."""


class NonPositiveVariance(BlockCorrError):
    """The Levinson recursion produced a non-positive prediction variance."""


class NotPositiveDefinite(BlockCorrError, ValueError):
    """A Hermitian matrix expected to be positive definite is not."""


class NoConvergence(BlockCorrError):
    """The canonical fixed-point iteration did not converge."""

    def __init__(self, max_iter, residual, z=None):
        self.max_iter = max_iter
        self.residual = residual
        self.z = z
        msg = f"no convergence after {max_iter} iterations (residual {residual:.3e})"
        if z is not None:
            msg += f" at z={z}"
        super().__init__(msg)


class ParseError(BlockCorrError, ValueError):
    """Malformed input data or configuration file."""


class DimensionError(BlockCorrError, ValueError):
    """Inconsistent or empty dimensions."""
