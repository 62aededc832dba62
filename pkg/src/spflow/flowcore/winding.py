"""Winding numbers of unitary loops and spectral flow through the loop
t -> exp(i pi (chi(D_t) + 1)).

The winding number is (1/2 pi i) int_0^1 Tr(s(x)^{-1} s'(x)) dx.  It is
computed with the periodic trapezoid rule on N equispaced nodes.  s' is
analytic when the loop supplies it and otherwise a five-point central
difference on the same periodic grid (step 1/N).  N doubles until the
rounded value has been the same on three consecutive levels and the last
change is below ``conv_tol``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConvergenceError
from ..funcalc import eigh_batch
from ..normfun import make_involutive_spline
from .paths import OperatorPath, require_invertible_endpoints
from .report import FlowReport, make_report

CHUNK = 4096


@dataclass(frozen=True)
class UnitaryLoop:
    """A loop x -> s(x) of unitaries on [0, 1] with s(0) = s(1).

    ``func`` / ``derivative`` are batch callables on arrays of x in [0, 1].
    """

    func: Callable = field(repr=False)
    dim: int
    derivative: Callable | None = field(default=None, repr=False)
    label: str = ""

    def __call__(self, x: float) -> np.ndarray:
        return np.asarray(self.func(np.array([x], dtype=float)))[0]

    def check(self, n: int = 16, tol: float = 1e-9) -> None:
        """Unitarity at n points and closure s(0) = s(1); raises ValueError."""
        xs = np.linspace(0.0, 1.0, n)
        S = np.asarray(self.func(xs), dtype=complex)
        eye = np.eye(self.dim)
        defect = np.max(np.abs(np.swapaxes(S, 1, 2).conj() @ S - eye))
        if defect > tol:
            raise ValueError(f"loop is not unitary: max|s*s - 1| = {defect:.3e}")
        gap = np.max(np.abs(S[0] - S[-1]))
        if gap > tol:
            raise ValueError(f"loop is not closed: |s(0) - s(1)| = {gap:.3e}")


def diagonal_phase_loop(ks) -> UnitaryLoop:
    """diag(exp(2 pi i k_j x)) with its analytic derivative."""
    k = np.asarray(ks, dtype=float)

    def func(xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ph = np.exp(2j * np.pi * xs[:, None] * k[None, :])
        return ph[:, :, None] * np.eye(k.size)[None]

    def deriv(xs):
        return func(xs) * (2j * np.pi * k)[None, None, :]

    return UnitaryLoop(func, k.size, deriv, f"diag-phase{tuple(int(v) for v in k)}")


def _trace_integrand(loop: UnitaryLoop, N: int, analytic: bool) -> complex:
    """sum_k Tr(s_k^* s'_k) over the periodic grid x_k = k/N."""
    total = 0.0 + 0.0j
    h = 1.0 / N
    for start in range(0, N, CHUNK):
        idx = np.arange(start, min(start + CHUNK, N))
        x = idx * h
        if analytic:
            S = np.asarray(loop.func(x), dtype=complex)
            dS = np.asarray(loop.derivative(x), dtype=complex)
        else:
            halo = np.arange(idx[0] - 2, idx[-1] + 3)
            Sh = np.asarray(loop.func((halo % N) * h), dtype=complex)
            S = Sh[2:-2]
            dS = (8.0 * (Sh[3:-1] - Sh[1:-3]) - (Sh[4:] - Sh[:-4])) / (12.0 * h)
        total += np.einsum("nij,nij->", S.conj(), dS)
    return total


def winding_number(
    loop: UnitaryLoop,
    quad_points: int = 64,
    *,
    max_points: int = 1 << 16,
    conv_tol: float = 1e-6,
    check: bool = True,
    refine: bool = True,
) -> FlowReport:
    """Winding number of ``loop`` with doubling refinement.

    With ``refine=False`` the rule is applied once at ``quad_points`` nodes
    (used for resolution sweeps).

    Raises:
        ConvergenceError: no convergence by ``max_points``; ``partial`` is
            the report for the finest level computed.
    """
    if check:
        loop.check()
    analytic = loop.derivative is not None
    N = max(8, int(quad_points))
    levels: list[tuple[int, float]] = []
    imag = 0.0
    while True:
        tr = _trace_integrand(loop, N, analytic)
        w = tr / N / (2j * np.pi)
        levels.append((N, float(w.real)))
        imag = float(w.imag)
        if not refine:
            break
        if len(levels) >= 3:
            ints = {round(v) for _, v in levels[-3:]}
            if len(ints) == 1 and abs(levels[-1][1] - levels[-2][1]) <= conv_tol:
                break
        if 2 * N > max_points:
            diag = _diag(levels, imag, analytic)
            value = levels[-1][1]
            partial = FlowReport("winding", value, int(round(value)), abs(value - round(value)),
                                 {}, diag, True)
            raise ConvergenceError(
                f"winding number not converged at {N} points (last change "
                f"{abs(levels[-1][1] - levels[-2][1]) if len(levels) > 1 else float('nan'):.3e})",
                partial,
            )
        N *= 2
    return make_report("winding", levels[-1][1], diagnostics=_diag(levels, imag, analytic))


def _diag(levels, imag, analytic):
    return {
        "quad_points": levels[-1][0],
        "levels": [[n, v] for n, v in levels],
        "imag_part": imag,
        "derivative": "analytic" if analytic else "five-point",
    }


def exponential_loop(path: OperatorPath, chi) -> UnitaryLoop:
    """x -> exp(i pi (chi(D_{a + x (b-a)}) + 1))."""
    a, b = path.interval

    def func(xs):
        ts = a + np.atleast_1d(np.asarray(xs, dtype=float)) * (b - a)
        lam, U = eigh_batch(path.batch(ts))
        g = np.exp(1j * np.pi * (chi(lam) + 1.0))
        return (U * g[:, None, :]) @ np.swapaxes(U, 1, 2).conj()

    return UnitaryLoop(func, path.dim, None, f"exp(i pi (chi(D)+1)) over {path.label}")


def spectral_flow_via_winding(
    path: OperatorPath,
    delta: float | None = None,
    quad_points: int = 64,
    *,
    max_points: int = 1 << 16,
    conv_tol: float = 1e-6,
    refine: bool = True,
) -> FlowReport:
    """Spectral flow as the winding number of exp(i pi (chi(D_t) + 1)).

    chi is the involutive spline of half-width ``delta`` (default: half the
    smaller endpoint gap), so chi(D_a), chi(D_b) are involutions and the
    loop closes at the identity.
    """
    ga, gb = require_invertible_endpoints(path)
    gap = min(ga, gb)
    if delta is None:
        delta = 0.5 * gap
    if not 0 < delta < gap:
        raise ValueError(f"delta={delta!r} must lie in (0, endpoint gap {gap!r})")
    chi = make_involutive_spline(delta)
    loop = exponential_loop(path, chi.chi)
    try:
        rep = winding_number(loop, quad_points, max_points=max_points, conv_tol=conv_tol,
                             refine=refine)
    except ConvergenceError as exc:
        if isinstance(exc.partial, FlowReport):
            exc.partial.diagnostics["delta"] = delta
        raise
    rep.diagnostics["delta"] = delta
    return rep
