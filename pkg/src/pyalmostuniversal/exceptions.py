"""Exceptions which may be raised when working with quadratic forms."""

from collections.abc import Sequence

__all__ = [
    "QuadraticFormError",
    "InvalidFormError",
    "DimensionMismatchError",
    "ResourceLimitError",
    "NotLocallyRepresentedError",
    "CoverNotFoundError",
    "FamilyEscapeError",
    "FileFormatError",
]


class QuadraticFormError(Exception):
    """An error raised by the computations of this package.

    All other exceptions defined in this module inherit from this one, so that you can
    catch any package error with a single except clause.

    Attributes:
        message: The error message.
    """

    message: str

    def __init__(self, message: str):
        """Initialize the exception.

        Args:
            message: The error message.
        """
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        """Return the error message."""
        return self.message


class InvalidFormError(QuadraticFormError):
    """A Gram matrix does not define a valid form.

    The Gram matrix must be square, symmetric and integral, and the form must be
    positive definite with a supported dimension.

    Attributes:
        message: The error message.
    """


class DimensionMismatchError(QuadraticFormError):
    """A vector or form has the wrong dimension.

    Attributes:
        message: The error message.
        expected: The expected dimension.
        actual: The dimension which was found instead.
    """

    expected: int
    actual: int

    def __init__(self, message: str, expected: int, actual: int):
        """Initialize the exception.

        Args:
            message: The error message.
            expected: The expected dimension.
            actual: The actual dimension. It must differ from the expected one.
        """
        if expected == actual:
            raise ValueError("The actual dimension must differ from the expected one.")
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class ResourceLimitError(QuadraticFormError):
    """A computation would exceed a configured resource cap.

    Attributes:
        message: The error message.
        limit: The configured cap.
        requested: The (estimated) amount of the resource the computation needs.
    """

    limit: float
    requested: float

    def __init__(self, message: str, limit: float, requested: float):
        """Initialize the exception.

        Args:
            message: The error message.
            limit: The configured cap.
            requested: The requested amount. It must be greater than the limit.
        """
        if requested <= limit:
            raise ValueError("The requested amount must exceed the limit.")
        super().__init__(message)
        self.limit = limit
        self.requested = requested


class NotLocallyRepresentedError(QuadraticFormError):
    """A number is not represented by a form over some p-adic integers.

    Attributes:
        message: The error message.
        m: The number.
    """

    m: int

    def __init__(self, message: str, m: int):
        """Initialize the exception.

        Args:
            message: The error message.
            m: The number which is not locally represented. It must be positive.
        """
        if m <= 0:
            raise ValueError("The number must be positive.")
        super().__init__(message)
        self.m = m


class CoverNotFoundError(QuadraticFormError):
    """No split local cover exists with a norm below the configured cap.

    Attributes:
        message: The error message.
        max_norm: The largest norm which was tried.
    """

    max_norm: int

    def __init__(self, message: str, max_norm: int):
        """Initialize the exception.

        Args:
            message: The error message.
            max_norm: The largest norm which was tried.
        """
        super().__init__(message)
        self.max_norm = max_norm


class FamilyEscapeError(QuadraticFormError):
    """Exceptions in anisotropic families survive the escalation by the family seeds.

    Such numbers require a manual review.

    Attributes:
        message: The error message.
        numbers: The surviving exceptions.
    """

    numbers: list[int]

    def __init__(self, message: str, numbers: Sequence[int]):
        """Initialize the exception.

        Args:
            message: The error message.
            numbers: The surviving exceptions. There must be at least one.
        """
        if not numbers:
            raise ValueError("At least one surviving exception must be given.")
        super().__init__(message)
        self.numbers = list(numbers)


class FileFormatError(QuadraticFormError):
    """A data file cannot be parsed.

    This is raised for a wrong magic header, a truncated file or a file which belongs
    to a different form.

    Attributes:
        message: The error message.
    """
