"""Relative index of a pair of projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IndexMismatchError
from ..funcalc import Projection
from .paths import OperatorPath

SV_TOL = 1e-10


@dataclass(frozen=True)
class ProjectionPair:
    P: Projection
    Q: Projection

    def __post_init__(self):
        if self.P.dim != self.Q.dim:
            raise ValueError(f"projections act on different spaces ({self.P.dim} vs {self.Q.dim})")

    @classmethod
    def from_matrices(cls, P, Q) -> "ProjectionPair":
        return cls(Projection.from_matrix(P), Projection.from_matrix(Q))


def _range_basis(P: Projection) -> np.ndarray:
    lam, V = np.linalg.eigh(P.matrix)
    return V[:, lam > 0.5]


def fredholm_index(pair: ProjectionPair, sv_tol: float = SV_TOL) -> int:
    """dim ker - dim coker of QP : ran P -> ran Q, from a numerical rank."""
    VP, VQ = _range_basis(pair.P), _range_basis(pair.Q)
    r, s = VP.shape[1], VQ.shape[1]
    if r == 0 or s == 0:
        return r - s
    sv = np.linalg.svd(VQ.conj().T @ VP, compute_uv=False)
    rank = int(np.sum(sv > sv_tol))
    return (r - rank) - (s - rank)


def relative_index(pair: ProjectionPair, sv_tol: float = SV_TOL) -> int:
    """ind(P, Q), computed as round(Tr(P - Q)) and as ind(QP); both must agree."""
    tr = float(np.trace(pair.P.matrix - pair.Q.matrix).real)
    by_trace = int(round(tr))
    by_rank = fredholm_index(pair, sv_tol)
    if by_trace != by_rank:
        raise IndexMismatchError(by_trace, by_rank)
    return by_trace


def segment_path(pair: ProjectionPair) -> OperatorPath:
    """t -> t(2P - 1) + (1 - t)(2Q - 1) on [0, 1]; its spectral flow is ind(P, Q)."""
    eye = np.eye(pair.P.dim)
    SQ = 2.0 * pair.Q.matrix - eye
    return OperatorPath.affine(SQ, 2.0 * (pair.P.matrix - pair.Q.matrix), (0.0, 1.0),
                               label="segment(2Q-1 -> 2P-1)")
