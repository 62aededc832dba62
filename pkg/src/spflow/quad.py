"""Adaptive quadrature, improper integrals with certified tails, and
finite differences of matrix paths.

The adaptive rule is Simpson with the usual pair estimate
``err = (S_left + S_right - S_whole) / 15`` and Richardson correction.
Refinement is breadth first so that a vectorized integrand is evaluated
once per level for all active panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erfcinv

from .errors import ConvergenceError

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int
    depth: int = 0


def _as_batch(f: Callable, vectorized: bool) -> Callable[[np.ndarray], np.ndarray]:
    if vectorized:
        return lambda xs: np.asarray(f(xs), dtype=float)
    return lambda xs: np.array([f(float(x)) for x in xs], dtype=float)


def integrate_panels(
    f: Callable,
    edges,
    tol: float,
    *,
    vectorized: bool = True,
    max_depth: int = 50,
    max_evals: int = 2_000_000,
) -> tuple[np.ndarray, np.ndarray, int, int, bool]:
    """Adaptive Simpson on every panel ``[edges[i], edges[i+1]]`` at once.

    The tolerance is shared out in proportion to panel width, so the summed
    error estimate of all panels stays below ``tol``.

    Returns:
        (values, errors, evaluations, max depth reached, budget_exhausted)
    """
    F = _as_batch(f, vectorized)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1].copy(), edges[1:].copy()
    m = lo.size
    values = np.zeros(m)
    errors = np.zeros(m)
    total = float(edges[-1] - edges[0])
    if m == 0 or total == 0.0:
        return values, errors, 0, 0, False

    fe = F(edges)
    mid = 0.5 * (lo + hi)
    fmid = F(mid)
    evals = edges.size + m
    flo, fhi = fe[:-1], fe[1:]
    width = hi - lo
    whole = width / 6.0 * (flo + 4.0 * fmid + fhi)
    ltol = tol * width / total
    owner = np.arange(m)
    depth = np.zeros(m, dtype=int)
    exhausted = False
    deepest = 0

    while lo.size:
        ql = 0.5 * (lo + mid)
        qr = 0.5 * (mid + hi)
        fq = F(np.concatenate([ql, qr]))
        evals += fq.size
        fql, fqr = fq[: lo.size], fq[lo.size:]
        h = hi - lo
        left = h / 12.0 * (flo + 4.0 * fql + fmid)
        right = h / 12.0 * (fmid + 4.0 * fqr + fhi)
        two = left + right
        err = (two - whole) / 15.0
        ok = np.abs(err) <= ltol
        # roundoff floor: further halving cannot improve these
        ok |= np.abs(err) <= 16.0 * _EPS * (np.abs(left) + np.abs(right))
        capped = ~ok & (depth >= max_depth)
        if evals > max_evals:
            capped = ~ok
        done = ok | capped
        if capped.any():
            exhausted = True
        np.add.at(values, owner[done], (two + err)[done])
        np.add.at(errors, owner[done], np.abs(err[done]))
        deepest = max(deepest, int(depth.max(initial=0)))

        r = ~done
        lo_r, mid_r, hi_r = lo[r], mid[r], hi[r]
        lo = np.concatenate([lo_r, mid_r])
        hi = np.concatenate([mid_r, hi_r])
        flo = np.concatenate([flo[r], fmid[r]])
        fhi = np.concatenate([fmid[r], fhi[r]])
        fmid = np.concatenate([fql[r], fqr[r]])
        mid = np.concatenate([ql[r], qr[r]])
        whole = np.concatenate([left[r], right[r]])
        ltol = np.concatenate([ltol[r], ltol[r]]) * 0.5
        owner = np.concatenate([owner[r], owner[r]])
        depth = np.concatenate([depth[r], depth[r]]) + 1

    return values, errors, evals, deepest, exhausted


def integrate_adaptive(
    f: Callable,
    a: float,
    b: float,
    tol: float = 1e-8,
    *,
    vectorized: bool = False,
    initial_panels: int = 1,
    max_depth: int = 50,
    max_evals: int = 2_000_000,
) -> QuadratureResult:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Args:
        f: Integrand.  With ``vectorized=True`` it receives a 1-D array of
            abscissae and must return an array of the same length.
        initial_panels: Number of equal panels to start from.  Raise it when
            the integrand may have features narrower than ``(b-a)/4``.

    Raises:
        ConvergenceError: the depth or evaluation cap was hit; ``partial``
            holds the best available :class:`QuadratureResult`.
    """
    if a == b:
        return QuadratureResult(0.0, 0.0, 0)
    if a > b:
        r = integrate_adaptive(f, b, a, tol, vectorized=vectorized,
                               initial_panels=initial_panels, max_depth=max_depth,
                               max_evals=max_evals)
        return QuadratureResult(-r.value, r.error_estimate, r.evaluations, r.depth)
    edges = np.linspace(a, b, max(1, int(initial_panels)) + 1)
    vals, errs, n, depth, exhausted = integrate_panels(
        f, edges, tol, vectorized=vectorized, max_depth=max_depth, max_evals=max_evals
    )
    result = QuadratureResult(float(np.sum(vals)), float(np.sum(errs)), n, depth)
    if exhausted:
        raise ConvergenceError(
            f"adaptive Simpson hit its subdivision cap on [{a}, {b}] "
            f"(estimate {result.value!r} +/- {result.error_estimate:.2e}, tol {tol:.1e})",
            partial=result,
        )
    return result


@dataclass(frozen=True)
class Decay:
    """Certified decay bound ``|f(z)| <= bound * envelope(z)``.

    kinds:
        ``polynomial``: envelope ``(1+z^2)^(-rate/2)``
        ``gaussian``:   envelope ``exp(-rate z^2)``
        ``compact``:    zero outside ``|z| <= rate``
    """

    kind: str
    rate: float
    bound: float = 1.0

    def __post_init__(self):
        if self.kind not in ("polynomial", "gaussian", "compact"):
            raise ValueError(f"unknown decay kind {self.kind!r}")
        if not self.rate > 0:
            raise ValueError(f"decay rate must be positive, got {self.rate}")

    def envelope(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "polynomial":
            return self.bound * (1.0 + z * z) ** (-self.rate / 2.0)
        if self.kind == "gaussian":
            return self.bound * np.exp(-self.rate * z * z)
        return np.where(np.abs(z) <= self.rate, self.bound, 0.0)

    def tail(self, X: float) -> float:
        """Upper bound on the integral of the envelope over ``|z| > X``."""
        if self.kind == "polynomial":
            if self.rate <= 1:
                return math.inf
            return 2.0 * self.bound * X ** (1.0 - self.rate) / (self.rate - 1.0)
        if self.kind == "gaussian":
            s = self.rate
            return self.bound * math.sqrt(math.pi / s) * math.erfc(math.sqrt(s) * X)
        return 0.0 if X >= self.rate else math.inf

    def window(self, tol: float) -> float:
        """Smallest X >= 1 with ``tail(X) <= tol`` (continuous in ``tol``)."""
        if self.kind == "compact":
            return float(self.rate)
        if self.kind == "polynomial":
            X = (2.0 * self.bound / ((self.rate - 1.0) * tol)) ** (1.0 / (self.rate - 1.0))
            return max(1.0, X)
        # solve the Gaussian tail bound exactly so the window moves continuously with tol
        s = self.rate
        y = tol / (self.bound * math.sqrt(math.pi / s))
        if y >= 1.0:
            return 1.0
        return max(1.0, float(erfcinv(y)) / math.sqrt(s))


def improper_integral(
    f: Callable,
    decay: Decay,
    tol: float = 1e-10,
    *,
    vectorized: bool = True,
) -> QuadratureResult:
    """Integral of ``f`` over the real line.

    The line is cut to ``[-X, X]`` where the certified tail bound is below
    ``tol/2``; the window is integrated to ``tol/2`` after the substitution
    ``z = sinh(v)``, which keeps slowly decaying integrands well resolved.
    """
    if decay.kind == "polynomial" and decay.rate <= 1:
        raise ValueError(f"polynomial decay of rate {decay.rate} <= 1 is not integrable")
    X = decay.window(tol / 2.0)
    tail = decay.tail(X)
    F = _as_batch(f, vectorized)
    V = math.asinh(X)

    def g(v):
        return F(np.sinh(v)) * np.cosh(v)

    r = integrate_adaptive(g, -V, V, tol / 2.0, vectorized=True, initial_panels=16)
    return QuadratureResult(r.value, r.error_estimate + tail, r.evaluations, r.depth)


def central_difference(path, t: float, h: float, order: int = 2) -> np.ndarray:
    """Symmetric difference quotient of a matrix path at ``t``.

    ``order=2``: (D(t+h) - D(t-h)) / 2h.  ``order=4``: the five-point stencil.
    """
    if h < 1e-12:
        raise ValueError(f"step h={h!r} is below 1e-12; cancellation would dominate")
    reach = h if order == 2 else 2 * h
    interval = getattr(path, "interval", None)
    if interval is not None:
        a, b = interval
        if t - reach < a or t + reach > b:
            raise ValueError(f"[{t - reach}, {t + reach}] leaves the path interval {interval}")
    if order == 2:
        return (np.asarray(path(t + h)) - np.asarray(path(t - h))) / (2.0 * h)
    if order == 4:
        d1 = np.asarray(path(t + h)) - np.asarray(path(t - h))
        d2 = np.asarray(path(t + 2 * h)) - np.asarray(path(t - 2 * h))
        return (8.0 * d1 - d2) / (12.0 * h)
    raise ValueError(f"order must be 2 or 4, got {order}")
