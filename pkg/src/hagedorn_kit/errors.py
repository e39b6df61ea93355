"""Exception and warning types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed or dimensionally inconsistent input."""


class ParametrizationError(ValueError):
    """A (Q, P) pair violates one of the Lubich conditions.

    The message names the first violated condition.
    """


class SingularityError(ValueError):
    """A matrix that must be inverted is singular or ill-conditioned."""


class NotFreeError(ValueError):
    """A symplectic matrix whose B block is not invertible was given where a free one is required."""


class FactorizationError(RuntimeError):
    """The free factorization ran out of retries."""


class TruncationWarning(UserWarning):
    """Grid values do not decay at the boundary, so periodic artifacts are possible."""


class QuadratureWarning(UserWarning):
    """The integrand lacks a Gaussian envelope and a generic quadrature was used."""
