"""Scenario generators: random smooth paths, paths with prescribed crossings,
and spectral truncations of two unbounded model operators.

circle Dirac: D = -i d/dtheta on L^2(S^1) in the Fourier basis, truncated to
modes n = -N..N, so D = diag(n); (1+D^2)^{-1/2} is in l^p exactly for p > 1.

theta model: D = diag(+-(k + 1/2)), k < N, a symmetric harmonic-oscillator
like spectrum; exp(-s D^2) is trace class for every s > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .flowcore.paths import OperatorPath
from .funcalc import apply_function, eigvalsh_batch, hermitian_part, schatten_norm

DEFAULT_GAP = 0.1


@dataclass(frozen=True)
class Scenario:
    path: OperatorPath
    expected_flow: int | None = None
    provenance: str = ""
    truncation_dim: int | None = None
    summability: str = "finite"

    def describe(self) -> dict:
        a, b = self.path.interval
        return {
            "label": self.path.label,
            "dim": self.path.dim,
            "interval": [a, b],
            "expected_flow": self.expected_flow,
            "provenance": self.provenance,
            "truncation_dim": self.truncation_dim,
            "summability": self.summability,
        }


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """GUE-like matrix with spectrum of order ``scale``."""
    X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return hermitian_part(X) * (scale / np.sqrt(2.0 * dim))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(X)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_projection(dim: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    V = random_unitary(dim, rng)[:, :rank]
    return hermitian_part(V @ V.conj().T)


def _nudge(lam_ends: np.ndarray, gap: float, step: float = 0.005, reach: float = 5.0) -> float:
    """Smallest scalar shift (in scan order 0, +s, -s, +2s, ...) giving endpoint gaps >= gap."""
    best, best_gap = 0.0, -1.0
    for k in range(int(reach / step) + 1):
        for c in ((k * step,) if k == 0 else (k * step, -k * step)):
            g = float(np.min(np.abs(lam_ends + c)))
            if g >= gap:
                return c
            if g > best_gap:
                best, best_gap = c, g
    return best


def make_random_path(dim: int, seed: int, degree: int = 2, gap: float = DEFAULT_GAP) -> Scenario:
    """D_t = c + sum_{k=0}^{degree} cos(k pi t) A_k + sin(k pi t) B_k on [0, 1].

    A_k, B_k are seeded random Hermitian matrices with norm ~ 1/(k+1); the
    scalar c is the first shift (scanning outward from 0) that makes both
    endpoint gaps at least ``gap``.
    """
    if dim < 1 or degree < 1:
        raise ValueError("dim and degree must be >= 1")
    rng = np.random.default_rng(np.uint64(seed))
    k = np.arange(degree + 1)
    A = np.stack([random_hermitian(dim, rng, 1.5 / (j + 1)) for j in k])
    B = np.stack([random_hermitian(dim, rng, 1.5 / (j + 1)) for j in k])
    w = np.pi * k

    def base(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        c, s = np.cos(np.outer(ts, w)), np.sin(np.outer(ts, w))
        return np.einsum("nk,kij->nij", c, A) + np.einsum("nk,kij->nij", s, B)

    ends = eigvalsh_batch(base(np.array([0.0, 1.0])))
    shift = _nudge(ends.ravel(), gap)
    eye = np.eye(dim)

    def func(ts):
        return base(ts) + shift * eye

    def deriv(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        c, s = np.cos(np.outer(ts, w)), np.sin(np.outer(ts, w))
        return np.einsum("nk,kij->nij", -s * w, A) + np.einsum("nk,kij->nij", c * w, B)

    path = OperatorPath(func, (0.0, 1.0), dim, deriv, f"random(dim={dim}, seed={seed}, degree={degree})")
    return Scenario(path, None, "no closed form; use the crossing oracle")


def make_crossing_path(crossings, inert=(1.0, -1.0)) -> Scenario:
    """Diagonal path on [0, 1] with branch d_i(t) = dir_i (t - t_i) per crossing.

    ``inert`` adds constant branches; expected flow is the sum of directions.
    """
    crossings = [(float(t), int(d)) for t, d in crossings]
    ts = [t for t, _ in crossings]
    if any(not 0.0 < t < 1.0 for t in ts):
        raise ValueError(f"crossing locations must be interior to (0, 1): {ts}")
    if len(set(ts)) != len(ts):
        raise ValueError("crossing locations must be distinct")
    if any(d not in (1, -1) for _, d in crossings):
        raise ValueError("directions must be +1 or -1")
    if any(c == 0 for c in inert):
        raise ValueError("inert branches must be invertible")
    slope = np.array([d for _, d in crossings] + [0.0] * len(inert), dtype=float)
    offset = np.array([-d * t for t, d in crossings] + list(inert), dtype=float)
    dim = slope.size

    def func(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        vals = offset[None, :] + ts[:, None] * slope[None, :]
        return vals[:, :, None] * np.eye(dim)[None]

    def deriv(ts):
        ts = np.atleast_1d(ts)
        return np.broadcast_to(np.diag(slope).astype(complex), (ts.size, dim, dim)).copy()

    expected = sum(d for _, d in crossings)
    path = OperatorPath(func, (0.0, 1.0), dim, deriv, f"crossings{crossings}")
    return Scenario(path, expected, "sum of prescribed crossing directions")


def _shift_path(diag: np.ndarray, window, label: str, **kw) -> OperatorPath:
    dim = diag.size
    eye = np.eye(dim)
    D = np.diag(diag).astype(complex)

    def func(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return D[None] + ts[:, None, None] * eye[None]

    def deriv(ts):
        ts = np.atleast_1d(ts)
        return np.broadcast_to(eye.astype(complex), (ts.size, dim, dim)).copy()

    return OperatorPath(func, window, dim, deriv, label, **kw)


def make_circle_dirac(N: int, window=(0.5, 1.5)) -> Scenario:
    """D_t = diag(n) + t, n = -N..N, t in ``window``.

    If the window length is an integer L, the path carries the shift
    unitary U e_n = e_{n-L}, which conjugates D_a to D_b except on the L
    edge modes at each end; the equivalence check is restricted to the
    central modes |n| <= N - L.
    """
    ta, tb = float(window[0]), float(window[1])
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(-N, N + 1)
    for t in (ta, tb):
        if float(t).is_integer() and abs(t) <= N:
            raise ValueError(f"window endpoint {t} makes the mode n={-int(t)} vanish")
    expected = int(np.sum((n > -tb) & (n < -ta)))
    L = tb - ta
    kw = {}
    if L > 0 and float(L).is_integer() and int(L) <= N:
        Li = int(L)
        dim = n.size
        U = np.zeros((dim, dim))
        # U e_j = e_{j-L} (cyclically); then (U D_a U*)_{mm} = m + L + t_a
        for j in range(dim):
            U[(j - Li) % dim, j] = 1.0
        keep = np.flatnonzero(np.abs(n) <= N - Li)
        kw = {"unitary": U, "equivalence_modes": keep}
    path = _shift_path(n.astype(float), (ta, tb), f"circle_dirac(N={N}, window=[{ta:g}, {tb:g}])", **kw)
    return Scenario(path, expected, "integer modes n with n + t crossing 0 inside the window",
                    truncation_dim=n.size, summability="p-summable(p>1)")


def make_theta_model(N: int, window=(0.1, 0.9)) -> Scenario:
    """D_t = diag(+-(k + 1/2)) + t, k = 0..N-1, t in ``window``."""
    ta, tb = float(window[0]), float(window[1])
    if N < 1:
        raise ValueError("N must be >= 1")
    half = np.arange(N) + 0.5
    spec = np.concatenate([-half[::-1], half])
    for t in (ta, tb):
        if np.any(spec + t == 0.0):
            raise ValueError(f"window endpoint {t} makes an eigenvalue vanish")
    # branch lam + t crosses zero at t = -lam, always upward
    expected = int(np.sum((-spec > ta) & (-spec < tb)))
    path = _shift_path(spec, (ta, tb), f"theta_model(N={N}, window=[{ta:g}, {tb:g}])")
    return Scenario(path, expected, "branches +-(k+1/2) + t crossing 0 inside the window",
                    truncation_dim=spec.size, summability="theta-summable(s>0)")


def conjugate_scenario(s: Scenario, seed: int, scale: float = 1.0, K=None) -> Scenario:
    """D~_t = U_t D_t U_t* with U_t = exp(t K), K skew-Hermitian (seeded unless given)."""
    p = s.path
    if K is None:
        K = 1j * random_hermitian(p.dim, np.random.default_rng(np.uint64(seed)), scale)
    K = np.asarray(K, dtype=complex)
    H = hermitian_part(-1j * K)  # K = iH
    mu, W = np.linalg.eigh(H)

    def U(ts):
        ph = np.exp(1j * np.outer(ts, mu))
        return (W[None] * ph[:, None, :]) @ W.conj().T[None]

    def func(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        Ut = U(ts)
        return Ut @ p.batch(ts) @ np.swapaxes(Ut, 1, 2).conj()

    def deriv(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        Ut = U(ts)
        Uh = np.swapaxes(Ut, 1, 2).conj()
        Dt = Ut @ p.batch(ts) @ Uh
        return Ut @ p.dot_batch(ts) @ Uh + K[None] @ Dt - Dt @ K[None]

    unitary = None
    if p.unitary is not None and p.equivalence_modes is None:
        Ua, Ub = U(np.array(p.interval))
        unitary = Ub @ p.unitary @ Ua.conj().T
    path = OperatorPath(func, p.interval, p.dim, deriv, f"conj({p.label}, seed={seed})", unitary,
                        breakpoints=p.breakpoints)
    return replace(s, path=path, provenance=s.provenance + "; unchanged by conjugation")


# -- summability diagnostics

def resolvent_schatten_norm(N: int, p: float) -> float:
    """||(1 + D^2)^{-1/2}||_p for the circle Dirac truncation of size 2N+1."""
    D = np.diag(np.arange(-N, N + 1).astype(float))
    return schatten_norm(apply_function(D, lambda x: (1.0 + x * x) ** -0.5), p)


def heat_trace(D, s: float) -> float:
    """Tr exp(-s D^2)."""
    return float(np.trace(apply_function(D, lambda x: np.exp(-s * x * x))).real)


def theta_operator(N: int) -> np.ndarray:
    half = np.arange(N) + 0.5
    return np.diag(np.concatenate([-half[::-1], half])).astype(complex)


GENERATORS = {
    "random_path": make_random_path,
    "crossing_path": make_crossing_path,
    "circle_dirac": make_circle_dirac,
    "theta_model": make_theta_model,
}
