"""Exception types raised across the package."""

from __future__ import annotations


class SpectralFlowError(Exception):
    """Base class for all package errors."""


class NotHermitianError(SpectralFlowError, ValueError):
    def __init__(self, asymmetry: float, tol: float):
        super().__init__(
            f"matrix is not Hermitian: max|A - A*| = {asymmetry:.3e} exceeds {tol:.3e}"
        )
        self.asymmetry = asymmetry
        self.tol = tol


class DomainError(SpectralFlowError, ValueError):
    """A scalar function was evaluated outside its domain."""


class NonInvertibleEndpointError(SpectralFlowError, ValueError):
    """An endpoint operator has an eigenvalue at (or numerically at) zero.

    Use :func:`spflow.flowcore.endpoint_regularize` to extend the path.
    """

    def __init__(self, which: str, gap: float, tol: float):
        super().__init__(
            f"endpoint {which} is not invertible: min|eigenvalue| = {gap:.3e} <= {tol:.3e}; "
            "extend the path with endpoint_regularize"
        )
        self.which = which
        self.gap = gap


class HypothesisError(SpectralFlowError, ValueError):
    """An input violates a hypothesis of the formula being applied."""


class ConvergenceError(SpectralFlowError, RuntimeError):
    """A numerical procedure exhausted its budget.

    ``partial`` carries whatever estimate was available when it gave up
    (a :class:`QuadratureResult` or a :class:`FlowReport`).
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class IndexMismatchError(SpectralFlowError, ArithmeticError):
    def __init__(self, trace_index: int, fredholm_index: int):
        super().__init__(
            f"relative index disagreement: round(Tr(P-Q)) = {trace_index}, "
            f"ind(QP) = {fredholm_index}"
        )
        self.trace_index = trace_index
        self.fredholm_index = fredholm_index
