from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..errors import ConvergenceError

log = logging.getLogger(__name__)

WARN_RESIDUAL = 1e-4
FAIL_RESIDUAL = 0.25


@dataclass
class FlowReport:
    """Result of one spectral-flow computation.

    ``terms`` holds the additive contributions to ``value`` (for the integral
    formula: ``integral``, ``endpoint_b``, ``endpoint_a``; the endpoint terms
    are stored with the sign they enter the sum).
    """

    method: str
    value: float
    integer: int
    residual: float
    terms: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "value": self.value,
            "integer": self.integer,
            "residual": self.residual,
            "flagged": self.flagged,
            "terms": dict(self.terms),
            "diagnostics": dict(self.diagnostics),
        }


def make_report(method: str, value: float, terms=None, diagnostics=None,
                warn: float = WARN_RESIDUAL, fail: float = FAIL_RESIDUAL) -> FlowReport:
    """Round ``value`` to the nearest integer and grade the residual.

    A residual in [warn, fail) is logged and flagged; at or above ``fail`` a
    :class:`ConvergenceError` carrying the report is raised.
    """
    value = float(value)
    integer = int(round(value))
    residual = abs(value - integer)
    rep = FlowReport(method, value, integer, residual, dict(terms or {}), dict(diagnostics or {}))
    if residual >= fail:
        rep.flagged = True
        raise ConvergenceError(
            f"{method}: value {value!r} is not near an integer (residual {residual:.3g})", rep
        )
    if residual >= warn:
        rep.flagged = True
        log.warning("%s: residual %.3g exceeds %.1e", method, residual, warn)
    return rep
