"""Exceptions raised by the dpskit package."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover
    from dpskit.sdp import SolveReport


class DpskitError(Exception):
    """Base class for every error raised on purpose by dpskit."""


class NotHermitianError(DpskitError, ValueError):
    """A matrix is too far from Hermitian to be symmetrized."""


class RegisterError(DpskitError, ValueError):
    """Register metadata is missing, inconsistent or indexed out of range."""


class DimensionMismatchError(DpskitError, ValueError):
    """Two operands do not have compatible shapes."""


class NotLDOIError(DpskitError, ValueError):
    """A state has entries outside the LDOI support pattern."""


class SupportMismatchError(DpskitError, ValueError):
    """A state does not have the support pattern of the requested regime."""


class NotBoseSymmetricError(DpskitError, ValueError):
    """A state is not invariant under swapping its two registers."""


class ParityError(DpskitError, ValueError):
    """A moment block index s' does not have the parity of t."""


class InconsistentModelError(DpskitError):
    """The linear equalities of a model admit no solution."""


class SdpaFormatError(DpskitError, ValueError):
    """A file does not follow the sparse SDPA layout."""


class NumericalFailure(DpskitError):  # noqa: N818
    """The interior-point method stalled or ran out of iterations.

    The last iterate is kept on the exception; its report has no verdict.
    """

    def __init__(self, message: str, report: SolveReport | None = None) -> None:
        """Store the best iterate alongside the message."""
        super().__init__(message)
        self.report = report


class DiagonalMismatchError(DpskitError, ValueError):
    """The matrices of a triple do not share one diagonal."""


class ParameterError(DpskitError, ValueError):
    """A family or experiment parameter lies outside its domain."""
