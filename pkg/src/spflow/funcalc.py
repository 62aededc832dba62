"""Functional calculus for Hermitian matrices.

Everything here goes through the eigendecomposition ``A = U diag(lam) U*``:
``f(A) = U diag(f(lam)) U*``.  Tolerances are relative to the size of ``A``
(max-abs entry for hermiticity, spectral radius for the zero test).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, NotHermitianError

HERMITIAN_RTOL = 1e-12
ZERO_EIG_TOL = 1e-10


def asymmetry(A: np.ndarray) -> float:
    """max |A - A*| entrywise."""
    A = np.asarray(A)
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


def check_hermitian(A, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """Return ``A`` as a complex square array, or raise :class:`NotHermitianError`."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    tol = rtol * max(1.0, float(np.max(np.abs(A))))
    asym = asymmetry(A)
    if asym > tol:
        raise NotHermitianError(asym, tol)
    return A


def hermitian_part(A: np.ndarray) -> np.ndarray:
    """(A + A*)/2, batched over leading axes."""
    return 0.5 * (A + np.swapaxes(A, -1, -2).conj())


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in ascending order and the unitary of eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T

    def apply(self, f: Callable) -> np.ndarray:
        vals = _evaluate(f, self.eigenvalues)
        U = self.eigenvectors
        return (U * vals) @ U.conj().T

    def trace_of(self, f: Callable) -> float:
        return float(np.sum(_evaluate(f, self.eigenvalues)))


def _evaluate(f: Callable, x: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        vals = np.asarray(f(x))
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape)
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)]
        raise DomainError(f"function undefined at eigenvalue(s) {bad[:5]!r}")
    return vals


def eigh(A) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues."""
    A = check_hermitian(A)
    lam, U = np.linalg.eigh(hermitian_part(A))
    return SpectralDecomposition(lam, U)


def apply_function(A, f: Callable) -> np.ndarray:
    """f(A) by the spectral theorem.

    ``f`` must accept a 1-D array of eigenvalues.  Non-finite values of ``f``
    raise :class:`DomainError`.
    """
    return eigh(A).apply(f)


def schatten_norm(A, p: float) -> float:
    """(sum sigma_i^p)^(1/p) over the singular values of ``A``."""
    if not p >= 1:
        raise ValueError(f"Schatten norm needs p >= 1, got {p}")
    s = np.linalg.svd(np.asarray(A, dtype=complex), compute_uv=False)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    smax = s.max(initial=0.0)
    if smax == 0.0:
        return 0.0
    # scale first so large p does not overflow
    return float(smax * np.sum((s / smax) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class Projection:
    """An orthogonal projection together with its rank.

    ``near_zero`` counts eigenvalues of the generating operator that fell
    within the zero tolerance; such projections are sensitive to perturbation.
    """

    matrix: np.ndarray
    rank: int
    near_zero: int = 0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, P, tol: float = 1e-10) -> "Projection":
        P = check_hermitian(P, rtol=1e-10)
        idem = float(np.max(np.abs(P @ P - P)))
        if idem > tol:
            raise ValueError(f"not a projection: max|P^2 - P| = {idem:.3e}")
        tr = float(np.trace(P).real)
        rank = round(tr)
        if abs(tr - rank) >= 1e-8:
            raise ValueError(f"projection trace {tr!r} is not an integer")
        return cls(hermitian_part(P), rank)

    @classmethod
    def onto(cls, vectors) -> "Projection":
        """Orthogonal projection onto the column span of ``vectors``."""
        V = np.asarray(vectors, dtype=complex)
        if V.ndim == 1:
            V = V[:, None]
        Q, r = np.linalg.qr(V)
        keep = np.abs(np.diag(r)) > 1e-12 * max(1.0, np.abs(r).max(initial=0.0))
        Q = Q[:, keep]
        return cls(hermitian_part(Q @ Q.conj().T), int(keep.sum()))


def spectral_projection_nonneg(A, zero_tol: float = ZERO_EIG_TOL) -> Projection:
    """1_{>=0}(A): projection onto eigenvectors with eigenvalue >= 0.

    Zero is counted as nonnegative.  Eigenvalues with ``|lam| <= zero_tol *
    max(1, ||A||)`` are numerically zero: they are included in the range and
    counted in ``Projection.near_zero`` (their sign is not reliable).
    """
    dec = eigh(A)
    lam, U = dec.eigenvalues, dec.eigenvectors
    scale = max(1.0, float(np.max(np.abs(lam))))
    zero = zero_tol * scale
    near = int(np.sum(np.abs(lam) <= zero))
    keep = lam >= -zero
    V = U[:, keep]
    return Projection(V @ V.conj().T, int(keep.sum()), near)


# -- batched helpers used by the path algorithms (no validation) --

def eigh_batch(As: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(hermitian_part(As))


def eigvalsh_batch(As: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(hermitian_part(As))


def apply_batch(lam: np.ndarray, U: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """U diag(vals) U* for stacks of decompositions."""
    return (U * vals[..., None, :]) @ np.swapaxes(U, -1, -2).conj()


# -- JSON wire format: array of rows, entries {"re": x, "im": y} --

def matrix_to_json(A) -> list:
    A = np.asarray(A, dtype=complex)
    return [[{"re": float(z.real), "im": float(z.imag)} for z in row] for row in A]


def matrix_from_json(rows) -> np.ndarray:
    try:
        A = np.array(
            [[complex(e.get("re", 0.0), e.get("im", 0.0)) if isinstance(e, dict) else complex(e)
              for e in row] for row in rows],
            dtype=complex,
        )
    except (TypeError, AttributeError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from None
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix JSON must be square array-of-rows, got shape {A.shape}")
    return A
