"""Matrix paths t -> D_t and the path algebra (concatenate, reverse, reparametrize)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..errors import HypothesisError
from ..funcalc import check_hermitian, eigvalsh_batch, hermitian_part

JUNCTION_TOL = 1e-10
FD_REL_STEP = 1e-5


def _vectorize(f: Callable) -> Callable[[np.ndarray], np.ndarray]:
    def batch(ts):
        return np.stack([np.asarray(f(float(t)), dtype=complex) for t in np.atleast_1d(ts)])
    return batch


@dataclass(frozen=True)
class OperatorPath:
    """A C^1 path of Hermitian matrices on ``interval``.

    ``func`` and ``derivative`` are *batch* callables: given a 1-D array of
    parameters they return an array of shape ``(n, dim, dim)``.  Use
    :meth:`from_function` to wrap a plain ``t -> matrix`` callable.  Both must
    be reentrant and side-effect free.

    ``unitary``, when set, is a U with ``U D_a U* = D_b`` on the index set
    ``equivalence_modes`` (all indices if None).  ``breakpoints`` lists
    interior parameters where the derivative may jump (junctions of
    concatenated or extended paths); quadrature starts with panel edges there.
    """

    func: Callable = field(repr=False)
    interval: tuple[float, float]
    dim: int
    derivative: Callable | None = field(default=None, repr=False)
    label: str = ""
    unitary: np.ndarray | None = field(default=None, repr=False)
    equivalence_modes: np.ndarray | None = field(default=None, repr=False)
    breakpoints: tuple = ()

    def __post_init__(self):
        a, b = self.interval
        if not a < b:
            raise ValueError(f"path interval must satisfy a < b, got {self.interval}")
        object.__setattr__(self, "interval", (float(a), float(b)))
        bps = tuple(sorted({float(t) for t in self.breakpoints if a < t < b}))
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def from_function(cls, f: Callable, interval, derivative: Callable | None = None,
                      label: str = "", **kw) -> "OperatorPath":
        a = float(interval[0])
        D0 = check_hermitian(f(a))
        return cls(_vectorize(f), interval, D0.shape[0],
                   _vectorize(derivative) if derivative is not None else None, label, **kw)

    @classmethod
    def affine(cls, A, B, interval=(0.0, 1.0), label: str = "affine") -> "OperatorPath":
        """D_t = A + t B."""
        A = check_hermitian(A)
        B = check_hermitian(B)

        def func(ts):
            ts = np.atleast_1d(np.asarray(ts, dtype=float))
            return A[None] + ts[:, None, None] * B[None]

        def deriv(ts):
            ts = np.atleast_1d(ts)
            return np.broadcast_to(B, (ts.size,) + B.shape).copy()

        return cls(func, interval, A.shape[0], deriv, label)

    @classmethod
    def polynomial(cls, coeffs, interval=(0.0, 1.0), label: str = "polynomial") -> "OperatorPath":
        """D_t = sum_k t^k C_k."""
        C = np.stack([check_hermitian(c) for c in coeffs])
        k = np.arange(C.shape[0])

        def func(ts):
            ts = np.atleast_1d(np.asarray(ts, dtype=float))
            return np.einsum("nk,kij->nij", ts[:, None] ** k, C)

        def deriv(ts):
            ts = np.atleast_1d(np.asarray(ts, dtype=float))
            w = np.where(k > 0, k * ts[:, None] ** np.maximum(k - 1, 0), 0.0)
            return np.einsum("nk,kij->nij", w, C)

        return cls(func, interval, C.shape[1], deriv, label)

    # -- evaluation

    @property
    def start(self) -> float:
        return self.interval[0]

    @property
    def end(self) -> float:
        return self.interval[1]

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    def __call__(self, t: float) -> np.ndarray:
        return self.batch(np.array([t], dtype=float))[0]

    def batch(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return hermitian_part(np.asarray(self.func(ts), dtype=complex))

    def dot(self, t: float) -> np.ndarray:
        return self.dot_batch(np.array([t], dtype=float))[0]

    def dot_batch(self, ts) -> np.ndarray:
        """Derivative at each t: analytic if available, else finite differences.

        The fallback uses a central difference with ``h = 1e-5 * length``
        and second-order one-sided differences within ``h`` of the ends.
        """
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if self.derivative is not None:
            return hermitian_part(np.asarray(self.derivative(ts), dtype=complex))
        a, b = self.interval
        h = FD_REL_STEP * (b - a)
        out = np.empty((ts.size, self.dim, self.dim), dtype=complex)
        left = ts - h < a
        right = ts + h > b
        mid = ~(left | right)
        if mid.any():
            t = ts[mid]
            out[mid] = (self.batch(t + h) - self.batch(t - h)) / (2 * h)
        if left.any():
            t = ts[left]
            out[left] = (-3 * self.batch(t) + 4 * self.batch(t + h) - self.batch(t + 2 * h)) / (2 * h)
        if right.any():
            t = ts[right]
            out[right] = (3 * self.batch(t) - 4 * self.batch(t - h) + self.batch(t - 2 * h)) / (2 * h)
        return out

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        E = self.batch(np.array(self.interval))
        return E[0], E[1]

    def endpoint_gaps(self) -> tuple[float, float]:
        """Smallest |eigenvalue| at each endpoint."""
        lam = eigvalsh_batch(self.batch(np.array(self.interval)))
        return float(np.min(np.abs(lam[0]))), float(np.min(np.abs(lam[1])))

    def with_label(self, label: str) -> "OperatorPath":
        return replace(self, label=label)

    # -- invariant checks

    def check_c1(self, n: int = 10, h: float = 1e-4, rtol: float = 1e-5, seed: int = 0) -> float:
        """Worst relative central-difference defect of the attached derivative.

        Raises ValueError if any defect exceeds ``rtol * (1 + ||D'_t||)``.
        """
        if self.derivative is None:
            return 0.0
        a, b = self.interval
        rng = np.random.default_rng(seed)
        ts = rng.uniform(a + h, b - h, size=n)
        cd = (self.batch(ts + h) - self.batch(ts - h)) / (2 * h)
        an = self.dot_batch(ts)
        defect = np.linalg.norm(cd - an, ord=2, axis=(1, 2))
        scale = 1.0 + np.linalg.norm(an, ord=2, axis=(1, 2))
        worst = float(np.max(defect / scale))
        if worst > rtol:
            raise ValueError(f"attached derivative disagrees with central differences: {worst:.3e}")
        return worst

    def check_hermitian(self, n: int = 10, seed: int = 0, rtol: float = 1e-12) -> None:
        a, b = self.interval
        ts = np.random.default_rng(seed).uniform(a, b, size=n)
        raw = np.asarray(self.func(ts), dtype=complex)
        for D in raw:
            check_hermitian(D, rtol)


# ------------------------------------------------------------------ algebra

def concatenate(p: OperatorPath, q: OperatorPath, tol: float = JUNCTION_TOL) -> OperatorPath:
    """Run ``p`` then ``q``; ``q`` is shifted to start where ``p`` ends."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch {p.dim} vs {q.dim}")
    jump = float(np.max(np.abs(p(p.end) - q(q.start))))
    scale = max(1.0, float(np.max(np.abs(p(p.end)))))
    if jump > tol * scale:
        raise ValueError(f"paths do not meet: junction mismatch {jump:.3e}")
    a, m = p.interval
    shift = m - q.start
    b = q.end + shift

    def split(fp, fq, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.empty((ts.size, p.dim, p.dim), dtype=complex)
        first = ts <= m
        if first.any():
            out[first] = fp(ts[first])
        if (~first).any():
            out[~first] = fq(ts[~first] - shift)
        return out

    return OperatorPath(
        lambda ts: split(p.batch, q.batch, ts),
        (a, b), p.dim,
        lambda ts: split(p.dot_batch, q.dot_batch, ts),
        f"({p.label} * {q.label})",
        breakpoints=p.breakpoints + (m,) + tuple(t + shift for t in q.breakpoints),
    )


def reverse(p: OperatorPath) -> OperatorPath:
    """t -> D_{a+b-t} on the same interval."""
    a, b = p.interval
    # a mode-restricted equivalence does not transfer cleanly to the swapped ends
    U = None
    if p.unitary is not None and p.equivalence_modes is None:
        U = p.unitary.conj().T
    return OperatorPath(
        lambda ts: p.batch(a + b - np.atleast_1d(ts)),
        p.interval, p.dim,
        lambda ts: -p.dot_batch(a + b - np.atleast_1d(ts)),
        f"reverse({p.label})", U,
        breakpoints=tuple(a + b - t for t in p.breakpoints),
    )


def reparametrize(
    p: OperatorPath,
    sigma: Callable,
    sigma_prime: Callable | None = None,
    interval=None,
) -> OperatorPath:
    """t -> D_{sigma(t)} for a monotone C^1 map of ``interval`` onto ``p.interval``.

    ``sigma`` must be vectorized.  Without ``sigma_prime`` its derivative is
    taken by central differences.
    """
    lo, hi = p.interval if interval is None else (float(interval[0]), float(interval[1]))
    s_lo, s_hi = float(sigma(np.array([lo]))[0]), float(sigma(np.array([hi]))[0])
    ends = sorted((s_lo, s_hi))
    if not (np.isclose(ends[0], p.start, atol=1e-12) and np.isclose(ends[1], p.end, atol=1e-12)):
        raise ValueError(f"sigma must map {(lo, hi)} onto {p.interval}, got {(s_lo, s_hi)}")
    probe = np.asarray(sigma(np.linspace(lo, hi, 257)))
    steps = np.diff(probe)
    if not (np.all(steps >= -1e-14) or np.all(steps <= 1e-14)):
        raise ValueError("sigma is not monotone")

    def clip(s):
        return np.clip(s, p.start, p.end)

    if sigma_prime is None:
        h = FD_REL_STEP * (hi - lo)

        def sigma_prime(ts):
            ts = np.asarray(ts, dtype=float)
            tp = np.minimum(ts + h, hi)
            tm = np.maximum(ts - h, lo)
            return (np.asarray(sigma(tp)) - np.asarray(sigma(tm))) / (tp - tm)

    def func(ts):
        return p.batch(clip(np.asarray(sigma(np.atleast_1d(ts)), dtype=float)))

    def deriv(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        s = clip(np.asarray(sigma(ts), dtype=float))
        return np.asarray(sigma_prime(ts), dtype=float)[:, None, None] * p.dot_batch(s)

    bps = tuple(_preimage(sigma, t, lo, hi) for t in p.breakpoints)
    return OperatorPath(func, (lo, hi), p.dim, deriv, f"reparam({p.label})", breakpoints=bps)


def _preimage(sigma: Callable, target: float, lo: float, hi: float) -> float:
    """Bisection for sigma(t) = target on a monotone sigma."""
    up = float(sigma(np.array([hi]))[0]) >= float(sigma(np.array([lo]))[0])
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = float(sigma(np.array([mid]))[0]) < target
        if below == up:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def add_bump(p: OperatorPath, H, eps: float) -> OperatorPath:
    """D_t + eps sin^2(pi (t-a)/(b-a)) H: a homotopy fixing both endpoints."""
    H = check_hermitian(H)
    if H.shape[0] != p.dim:
        raise ValueError("bump dimension mismatch")
    a, b = p.interval
    w = np.pi / (b - a)

    def func(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return p.batch(ts) + (eps * np.sin(w * (ts - a)) ** 2)[:, None, None] * H

    def deriv(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        g = eps * w * np.sin(2 * w * (ts - a))
        return p.dot_batch(ts) + g[:, None, None] * H

    return OperatorPath(func, p.interval, p.dim, deriv, f"bump({p.label})",
                        p.unitary, p.equivalence_modes, p.breakpoints)


def require_invertible_endpoints(p: OperatorPath, rtol: float = 1e-10) -> tuple[float, float]:
    from ..errors import NonInvertibleEndpointError

    Da, Db = p.endpoints()
    ga, gb = p.endpoint_gaps()
    for which, gap, D in (("a", ga, Da), ("b", gb, Db)):
        tol = rtol * max(1.0, float(np.max(np.abs(D))))
        if gap <= tol:
            raise NonInvertibleEndpointError(f"{which} (t={p.interval[0 if which == 'a' else 1]})",
                                             gap, tol)
    return ga, gb


def check_endpoint_equivalence(p: OperatorPath, tol: float = 1e-8) -> float:
    """||U D_a U* - D_b|| restricted to ``equivalence_modes``; raises if above tol."""
    if p.unitary is None:
        raise HypothesisError("path carries no unitary U with U D_a U* = D_b")
    Da, Db = p.endpoints()
    U = np.asarray(p.unitary, dtype=complex)
    R = U @ Da @ U.conj().T - Db
    if p.equivalence_modes is not None:
        idx = np.asarray(p.equivalence_modes)
        R = R[np.ix_(idx, idx)]
    defect = float(np.linalg.norm(R, ord=2)) if R.size else 0.0
    scale = max(1.0, float(np.linalg.norm(Db, ord=2)))
    if defect > tol * scale:
        raise HypothesisError(
            f"endpoints are not unitarily equivalent: ||U D_a U* - D_b|| = {defect:.3e}"
        )
    return defect
