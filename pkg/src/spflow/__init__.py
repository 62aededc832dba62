"""Spectral flow of paths of Hermitian matrices.

Three independent computations (crossing count, winding number of a unitary
loop, integral formula with endpoint corrections) plus normalizing
functions, quadrature helpers and model scenarios to cross-check them.
"""

from .errors import (
    ConvergenceError,
    DomainError,
    HypothesisError,
    IndexMismatchError,
    NonInvertibleEndpointError,
    NotHermitianError,
    SpectralFlowError,
)
from .flowcore import (
    FlowReport,
    OperatorPath,
    ProjectionPair,
    UnitaryLoop,
    concatenate,
    endpoint_regularize,
    relative_index,
    reparametrize,
    reverse,
    segment_path,
    spectral_flow_corollary,
    spectral_flow_crossings,
    spectral_flow_integral,
    spectral_flow_via_winding,
    winding_number,
)
from .normfun import make_chi_p, make_chi_theta, make_involutive_spline, validate_normalizing

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DomainError",
    "FlowReport",
    "HypothesisError",
    "IndexMismatchError",
    "NonInvertibleEndpointError",
    "NotHermitianError",
    "OperatorPath",
    "ProjectionPair",
    "SpectralFlowError",
    "UnitaryLoop",
    "concatenate",
    "endpoint_regularize",
    "make_chi_p",
    "make_chi_theta",
    "make_involutive_spline",
    "relative_index",
    "reparametrize",
    "reverse",
    "segment_path",
    "spectral_flow_corollary",
    "spectral_flow_crossings",
    "spectral_flow_integral",
    "spectral_flow_via_winding",
    "validate_normalizing",
    "winding_number",
]
