"""Spectral flow of Hermitian matrix paths by three independent routes.

* :func:`spectral_flow_crossings` counts signed zero crossings (the oracle),
* :func:`spectral_flow_via_winding` takes the winding number of the unitary
  loop exp(i pi (chi(D_t) + 1)),
* :func:`spectral_flow_integral` evaluates the integral formula with
  endpoint corrections (and :func:`spectral_flow_corollary` its form for
  unitarily equivalent endpoints).
"""

from .crossings import spectral_flow_crossings
from .index import ProjectionPair, fredholm_index, relative_index, segment_path
from .integral import (
    endpoint_term,
    integrate_trace,
    spectral_flow_corollary,
    spectral_flow_integral,
    trace_integrand,
)
from .paths import (
    OperatorPath,
    add_bump,
    check_endpoint_equivalence,
    concatenate,
    reparametrize,
    require_invertible_endpoints,
    reverse,
)
from .regularize import endpoint_regularize, smooth_step
from .report import FlowReport, make_report
from .winding import (
    UnitaryLoop,
    diagonal_phase_loop,
    exponential_loop,
    spectral_flow_via_winding,
    winding_number,
)

__all__ = [
    "FlowReport",
    "OperatorPath",
    "ProjectionPair",
    "UnitaryLoop",
    "add_bump",
    "check_endpoint_equivalence",
    "concatenate",
    "diagonal_phase_loop",
    "endpoint_regularize",
    "endpoint_term",
    "exponential_loop",
    "fredholm_index",
    "integrate_trace",
    "make_report",
    "relative_index",
    "reparametrize",
    "require_invertible_endpoints",
    "reverse",
    "segment_path",
    "smooth_step",
    "spectral_flow_corollary",
    "spectral_flow_crossings",
    "spectral_flow_integral",
    "spectral_flow_via_winding",
    "trace_integrand",
    "winding_number",
]
