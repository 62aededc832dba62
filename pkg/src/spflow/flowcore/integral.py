"""Integral formulas for the spectral flow.

For a C^1 path with invertible endpoints and any normalizing function chi,

    sf = 1/2 int_a^b Tr(D'_t chi'(D_t)) dt
         + 1/2 Tr(2 P_b - 1 - chi(D_b)) - 1/2 Tr(2 P_a - 1 - chi(D_a)),

P = 1_{>=0}(D).  When D_b = U D_a U* and psi is even, nonnegative with
psi(0) > 0, the endpoint terms drop out:

    sf = (1/C) int_a^b Tr(D'_t psi(D_t)) dt,    C = int_R psi.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ConvergenceError, HypothesisError
from ..funcalc import apply_function, eigh_batch, spectral_projection_nonneg
from ..normfun import NormalizingFunction
from ..quad import Decay, QuadratureResult, improper_integral, integrate_panels
from .paths import OperatorPath, check_endpoint_equivalence, require_invertible_endpoints
from .report import FlowReport, make_report

INITIAL_PANELS = 64
MAX_EVALS = 2_000_000


def trace_integrand(path: OperatorPath, f: Callable) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized t -> Tr(D'_t f(D_t))."""

    def g(ts):
        ts = np.atleast_1d(ts)
        lam, V = eigh_batch(path.batch(ts))
        dD = path.dot_batch(ts)
        # diagonal of V* D' V
        diag = np.sum(V.conj() * (dD @ V), axis=1).real
        return np.sum(np.asarray(f(lam)) * diag, axis=1)

    return g


def integrate_trace(path: OperatorPath, f: Callable, tol: float = 1e-8,
                    initial_panels: int = INITIAL_PANELS,
                    max_evals: int = MAX_EVALS) -> QuadratureResult:
    """int_a^b Tr(D'_t f(D_t)) dt by adaptive Simpson.

    Each smooth piece between ``path.breakpoints`` is integrated on its own,
    with abscissae pulled strictly inside the piece, so a jump of D' at a
    junction is seen only through its one-sided limits.
    """
    a, b = path.interval
    g = trace_integrand(path, f)
    cuts = np.concatenate([[a], path.breakpoints, [b]])
    eta = 1e-13 * (b - a)
    n_total = max(1, int(initial_panels))
    value = error = 0.0
    evals = depth = 0
    exhausted = False
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        share = (hi - lo) / (b - a)
        if len(cuts) > 2:
            inner = lambda ts, lo=lo, hi=hi: g(np.clip(ts, lo + eta, hi - eta))  # noqa: E731
        else:
            inner = g
        edges = np.linspace(lo, hi, max(1, round(n_total * share)) + 1)
        vals, errs, n, d, ex = integrate_panels(inner, edges, tol * share, vectorized=True,
                                                max_evals=max(1, max_evals - evals))
        value += float(np.sum(vals))
        error += float(np.sum(errs))
        evals += n
        depth = max(depth, d)
        exhausted |= ex
    result = QuadratureResult(value, error, evals, depth)
    if exhausted:
        raise ConvergenceError(
            f"adaptive Simpson hit its subdivision cap on [{a}, {b}] "
            f"(estimate {result.value!r} +/- {result.error_estimate:.2e}, tol {tol:.1e})",
            partial=result,
        )
    return result


def endpoint_term(D: np.ndarray, chi: Callable) -> float:
    """1/2 Tr(2 P - 1 - chi(D)) with P = 1_{>=0}(D)."""
    P = spectral_projection_nonneg(D).matrix
    X = 2.0 * P - np.eye(D.shape[0]) - apply_function(D, chi)
    return 0.5 * float(np.trace(X).real)


def spectral_flow_integral(
    path: OperatorPath,
    chi: NormalizingFunction,
    tol: float = 1e-8,
    *,
    initial_panels: int = INITIAL_PANELS,
    max_evals: int = MAX_EVALS,
    check_chi: bool = True,
) -> FlowReport:
    """Spectral flow from the integral formula with endpoint corrections.

    ``terms`` records ``integral`` (already halved), ``endpoint_b`` and
    ``endpoint_a`` (with the minus sign applied); their sum is ``value``.
    """
    require_invertible_endpoints(path)
    if check_chi and not chi.validation.passed:
        raise HypothesisError(f"{chi.label} is not a normalizing function:\n{chi.validation}")
    Da, Db = path.endpoints()
    ends = {"endpoint_b": endpoint_term(Db, chi.chi), "endpoint_a": -endpoint_term(Da, chi.chi)}
    try:
        q = integrate_trace(path, chi.chi_prime, 2.0 * tol, initial_panels, max_evals)
    except ConvergenceError as exc:
        part = exc.partial
        terms = {"integral": 0.5 * part.value, **ends}
        value = sum(terms.values())
        raise ConvergenceError(
            f"integral term did not reach tol {tol:.1e}: {exc}",
            FlowReport("integral", value, int(round(value)), abs(value - round(value)), terms,
                       {"chi": chi.label, "quad_error": 0.5 * part.error_estimate,
                        "evaluations": part.evaluations, "depth": part.depth}, True),
        ) from exc
    terms = {"integral": 0.5 * q.value, **ends}
    value = terms["integral"] + terms["endpoint_b"] + terms["endpoint_a"]
    return make_report("integral", value, terms, {
        "chi": chi.label,
        "quad_error": 0.5 * q.error_estimate,
        "evaluations": q.evaluations,
        "depth": q.depth,
    })


def _check_density(psi: Callable, X: float = 50.0, n: int = 5001) -> None:
    x = np.linspace(0.0, X, n)
    fp, fm = np.asarray(psi(x), dtype=float), np.asarray(psi(-x), dtype=float)
    scale = max(float(np.max(np.abs(fp))), 1e-300)
    if np.max(np.abs(fp - fm)) > 1e-12 * scale:
        raise HypothesisError("psi is not even")
    if np.min(np.concatenate([fp, fm])) < -1e-14 * scale:
        raise HypothesisError("psi takes negative values")
    if not fp[0] > 0:
        raise HypothesisError("psi(0) must be positive")


def spectral_flow_corollary(
    path: OperatorPath,
    psi: Callable,
    tol: float = 1e-8,
    *,
    decay: Decay | None = None,
    norm_constant: float | None = None,
    equivalence_tol: float = 1e-8,
    initial_panels: int = INITIAL_PANELS,
    max_evals: int = MAX_EVALS,
) -> FlowReport:
    """Spectral flow (1/C) int Tr(D'_t psi(D_t)) dt for unitarily equivalent endpoints.

    ``C`` is ``norm_constant`` if given, else the integral of ``psi`` over R
    computed with the certified tail bound ``decay``.

    Raises:
        HypothesisError: the path's unitary does not conjugate D_a to D_b
            (within ``equivalence_tol``), or psi is not even / nonnegative.
    """
    defect = check_endpoint_equivalence(path, equivalence_tol)
    require_invertible_endpoints(path)
    _check_density(psi)
    if norm_constant is None:
        if decay is None:
            raise ValueError("need either decay (to integrate psi) or norm_constant")
        cq = improper_integral(psi, decay, tol=min(tol, 1e-10))
        C, c_err = cq.value, cq.error_estimate
    else:
        C, c_err = float(norm_constant), 0.0
    q = integrate_trace(path, psi, tol * C, initial_panels, max_evals)
    value = q.value / C
    return make_report("corollary", value, {"integral": value}, {
        "norm_constant": C,
        "norm_constant_error": c_err,
        "quad_error": q.error_estimate / C,
        "evaluations": q.evaluations,
        "equivalence_defect": defect,
    })
