"""Extension of a path with non-invertible endpoints by scalar flaps."""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError
from ..funcalc import eigvalsh_batch
from .paths import OperatorPath


def _bump_base(u):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    f, g = _bump_base(u), _bump_base(1.0 - u)
    return f / (f + g)


def smooth_step_prime(u):
    u = np.asarray(u, dtype=float)
    f, g = _bump_base(u), _bump_base(1.0 - u)
    with np.errstate(divide="ignore", invalid="ignore"):
        fp = np.where(u > 0, f / np.where(u > 0, u * u, 1.0), 0.0)
        gp = np.where(u < 1, g / np.where(u < 1, (1 - u) ** 2, 1.0), 0.0)
    return (fp * g + f * gp) / (f + g) ** 2


def _forbidden(lam: np.ndarray, eps: float) -> bool:
    """True if some eigenvalue lies in [-eps, 0)."""
    return bool(np.any((lam >= -eps) & (lam < 0)))


def endpoint_regularize(path: OperatorPath, epsilon: float | None = None) -> OperatorPath:
    """Extend ``path`` to [a-1, b+1] so that both new endpoints are invertible.

    Left flap: D_a + phi(t) on [a-1, a]; right flap: D_b + phi(t) on [b, b+1].
    phi is a smooth bump equal to ``epsilon`` at the outer ends and zero on
    [a-1/2, b+1/2].  ``epsilon`` must leave [-epsilon, 0) free of endpoint
    eigenvalues; when omitted the largest admissible value of the form
    2^-k * max(1, ||D||) is used.
    """
    a, b = path.interval
    lam = eigvalsh_batch(path.batch(np.array([a, b])))
    both = np.concatenate(lam)
    if epsilon is None:
        scale = max(1.0, float(np.max(np.abs(both))))
        for k in range(60):
            cand = scale * 2.0 ** -k
            if not _forbidden(both, cand):
                epsilon = cand
                break
        else:
            raise ConvergenceError("no admissible epsilon found; supply one explicitly")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if _forbidden(both, epsilon):
        bad = both[(both >= -epsilon) & (both < 0)]
        raise ValueError(
            f"epsilon={epsilon} is too large: endpoint eigenvalue(s) {bad} lie in [-epsilon, 0)"
        )
    eps = float(epsilon)
    Da, Db = path.endpoints()
    eye = np.eye(path.dim)

    def phi(ts):
        left = smooth_step((a - 0.5 - ts) / 0.5)
        right = smooth_step((ts - b - 0.5) / 0.5)
        return eps * np.where(ts < a, left, np.where(ts > b, right, 0.0))

    def phi_prime(ts):
        left = -2.0 * smooth_step_prime((a - 0.5 - ts) / 0.5)
        right = 2.0 * smooth_step_prime((ts - b - 0.5) / 0.5)
        return eps * np.where(ts < a, left, np.where(ts > b, right, 0.0))

    def func(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.empty((ts.size, path.dim, path.dim), dtype=complex)
        lo, hi = ts < a, ts > b
        mid = ~(lo | hi)
        out[lo] = Da[None] + phi(ts[lo])[:, None, None] * eye
        out[hi] = Db[None] + phi(ts[hi])[:, None, None] * eye
        if mid.any():
            out[mid] = path.batch(ts[mid])
        return out

    def deriv(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.zeros((ts.size, path.dim, path.dim), dtype=complex)
        flap = (ts < a) | (ts > b)
        out[flap] = phi_prime(ts[flap])[:, None, None] * eye
        mid = ~flap
        if mid.any():
            out[mid] = path.dot_batch(ts[mid])
        return out

    return OperatorPath(func, (a - 1.0, b + 1.0), path.dim, deriv,
                        f"regularized({path.label}, eps={eps:g})",
                        breakpoints=(a,) + path.breakpoints + (b,))
