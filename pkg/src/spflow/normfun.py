"""Normalizing functions.

A normalizing function is a C^1 map chi: R -> [-1, 1] with chi^{-1}(0) = {0},
limits -1 and +1 at -inf and +inf, and chi' >= 0 vanishing at infinity with
chi'(0) > 0.  Three families are provided:

* ``make_chi_p(p)``: chi_p(x) = (2/C_p) int_0^x (1+z^2)^{-(p+1)/2} dz
* ``make_chi_theta(s)``: erf(sqrt(s) x)
* ``make_involutive_spline(delta)``: sign(x) outside (-delta, delta), an odd
  quintic inside, so chi(D) is an involution whenever spec(D) avoids
  (-delta, delta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.special import erf

from .quad import Decay, improper_integral, integrate_panels

FD_STEP = 1e-7


@dataclass(frozen=True)
class NormalizingFunction:
    """A normalizing function with its derivative.

    Attributes:
        chi, chi_prime: vectorized callables.
        decay_class: ``("polynomial", p)``, ``("gaussian", s)`` or
            ``("compactly-flat", delta)``; describes how fast chi approaches
            +-1 and chi' approaches 0.
        prime_decay: certified bound on chi' usable for integrals over R.
    """

    chi: Callable = field(repr=False)
    chi_prime: Callable = field(repr=False)
    decay_class: tuple
    label: str
    prime_decay: Decay | None = field(default=None, repr=False)

    def __call__(self, x):
        return self.chi(x)

    def envelope(self, x):
        """Decay envelope phi of the class, up to a constant."""
        kind, par = self.decay_class
        x = np.asarray(x, dtype=float)
        if kind == "polynomial":
            return (1.0 + x * x) ** (-par / 2.0)
        if kind == "gaussian":
            return np.exp(-par * x * x)
        return (np.abs(x) < par).astype(float)

    @cached_property
    def validation(self) -> "ValidationReport":
        return validate_normalizing(self)


# ---------------------------------------------------------------- validation

@dataclass
class Check:
    name: str
    passed: bool
    worst_x: float
    worst_value: float
    detail: str = ""


@dataclass
class ValidationReport:
    label: str
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = [f"normalizing-function validation for {self.label}:"]
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.name}: worst at x={c.worst_x:.6g} ({c.worst_value:.3e}) {c.detail}")
        return "\n".join(lines)


def standard_grid(X: float = 50.0, step: float = 0.01) -> np.ndarray:
    n = int(round(2 * X / step))
    g = np.linspace(-X, X, n + 1)
    g[n // 2] = 0.0
    return g


def validate_normalizing(
    f: NormalizingFunction,
    grid=None,
    *,
    limit_tol: float = 0.05,
    fd_tol: float = 1e-6,
) -> ValidationReport:
    """Check the defining properties of a normalizing function on a grid.

    The grid must contain 0 and cover at least [-50, 50].  Report only;
    nothing is raised.
    """
    x = standard_grid() if grid is None else np.sort(np.asarray(grid, dtype=float))
    if x[0] > -50 or x[-1] < 50:
        raise ValueError("validation grid must cover at least [-50, 50]")
    if not np.any(x == 0.0):
        x = np.sort(np.append(x, 0.0))
    h = FD_STEP
    # one call so that chi values at x-h, x, x+h come from a single consistent evaluation
    both = np.asarray(f.chi(np.concatenate([x, x - h, x + h])), dtype=float)
    c, cm, cp = np.split(both, 3)
    d = np.asarray(f.chi_prime(x), dtype=float)
    checks = []

    zero = x == 0.0
    # zero set: chi(0) = 0 and sign(chi) = sign(x) elsewhere
    bad = np.where(zero, np.abs(c) > 1e-14, np.sign(c) != np.sign(x))
    if bad.any():
        i = int(np.argmax(bad))
    else:
        i = int(np.argmin(np.where(zero, np.inf, np.abs(c))))
    checks.append(Check("zero set {0}", not bad.any(), x[i], c[i],
                        "" if not bad.any() else f"{int(bad.sum())} offending points"))

    # limits at -inf and +inf: within tolerance at the grid ends and approaching monotonically
    gap_hi = np.abs(c[-1] - 1.0)
    gap_lo = np.abs(c[0] + 1.0)
    outer = np.abs(x) >= 0.5 * x[-1]
    gaps = np.abs(np.abs(c) - 1.0)
    pos = outer & (x > 0)
    neg = outer & (x < 0)
    monotone = (np.all(np.diff(gaps[pos]) <= 1e-15) and np.all(np.diff(gaps[neg]) >= -1e-15))
    ok = gap_hi <= limit_tol and gap_lo <= limit_tol and monotone and c[-1] > 0 and c[0] < 0
    worst = (x[-1], gap_hi) if gap_hi >= gap_lo else (x[0], gap_lo)
    checks.append(Check("limits -1/+1", bool(ok), worst[0], worst[1],
                        "" if monotone else "approach to +-1 is not monotone"))

    # derivative: chi'(0) > 0, chi' >= 0, chi' -> 0 at the grid ends
    i0 = int(np.argmax(zero))
    i = int(np.argmin(d))
    dmax = float(np.max(np.abs(d)))
    vanish = max(d[0], d[-1]) <= 0.01 * max(dmax, 1e-300)
    ok = d[i0] > 0 and d[i] >= -1e-14 and vanish
    checks.append(Check("chi' >= 0, chi'(0) > 0, chi' in C_0", bool(ok), x[i], d[i],
                        f"chi'(0)={d[i0]:.3e}, chi'(ends)={max(d[0], d[-1]):.3e}"))

    # chi' is the derivative of chi
    fd = (cp - cm) / (2 * h)
    dev = np.abs(fd - d)
    i = int(np.argmax(dev))
    tol = fd_tol * max(1.0, dmax)
    checks.append(Check("finite-difference chi' agreement", bool(dev[i] <= tol), x[i], dev[i],
                        f"tol {tol:.1e}"))
    return ValidationReport(f.label, checks)


def fitted_envelope_constant(values, envelope, floor: float = 1e-250) -> float:
    """Smallest C with |values| <= C * envelope on the points where the envelope is representable."""
    values = np.abs(np.asarray(values, dtype=float))
    envelope = np.asarray(envelope, dtype=float)
    keep = envelope > floor
    return float(np.max(values[keep] / envelope[keep]))


# ---------------------------------------------------------------- families

def _cp_integrand(q):
    return lambda z: (1.0 + z * z) ** (-q)


def make_chi_p(p: float, tol: float = 1e-12) -> NormalizingFunction:
    """chi_p(x) = (2/C_p) int_0^x (1+z^2)^{-(p+1)/2} dz, C_p the integral over R.

    Closed forms for p = 1 ((2/pi) arctan x) and p = 2 (x / sqrt(1+x^2)).
    Other p use adaptive quadrature in ``v = asinh z``, where the integrand
    becomes ``cosh(v)^{-p}``.
    """
    if not p >= 1:
        raise ValueError(f"chi_p needs p >= 1, got {p}")
    q = (p + 1.0) / 2.0
    if p == 1:
        C = math.pi
        chi = lambda x: (2.0 / math.pi) * np.arctan(x)  # noqa: E731
    elif p == 2:
        C = 2.0
        chi = lambda x: np.asarray(x) / np.sqrt(1.0 + np.asarray(x) ** 2)  # noqa: E731
    else:
        C = improper_integral(_cp_integrand(q), Decay("polynomial", p + 1.0), tol=tol).value
        chi = _QuadratureChi(p, C, tol)
    scale = 2.0 / C

    def chi_prime(x):
        x = np.asarray(x, dtype=float)
        return scale * (1.0 + x * x) ** (-q)

    return NormalizingFunction(
        chi=chi,
        chi_prime=chi_prime,
        decay_class=("polynomial", float(p)),
        label=f"chi_p(p={p:g})",
        prime_decay=Decay("polynomial", p + 1.0, scale),
    )


class _QuadratureChi:
    """Vectorized chi_p for general p by cumulative panel quadrature.

    The sorted |x| values split [0, max|x|] (in asinh coordinates) into
    panels that are integrated together and summed cumulatively, so nearby
    abscissae share all but a tiny panel; difference quotients stay accurate.
    """

    def __init__(self, p: float, C: float, tol: float):
        self.p = p
        self.scale = 2.0 / C
        self.tol = tol

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        v = np.arcsinh(np.abs(flat))
        order = np.argsort(v, kind="stable")
        vs = v[order]
        edges = np.concatenate([[0.0], vs])
        p = self.p
        vals, _, _, _, _ = integrate_panels(
            lambda u: np.cosh(u) ** (-p), edges, self.tol / self.scale
        )
        cum = np.empty_like(vs)
        cum[:] = np.cumsum(vals)
        out = np.empty_like(flat)
        out[order] = np.minimum(self.scale * cum, 1.0)
        out = np.sign(flat) * out
        return out.reshape(x.shape) if x.ndim else float(out[0])


def make_chi_theta(s: float) -> NormalizingFunction:
    """chi^s(x) = erf(sqrt(s) x), chi' = 2 sqrt(s/pi) exp(-s x^2)."""
    if not s > 0:
        raise ValueError(f"chi_theta needs s > 0, got {s}")
    rs = math.sqrt(s)
    a = 2.0 * math.sqrt(s / math.pi)

    def chi(x):
        return erf(rs * np.asarray(x, dtype=float))

    def chi_prime(x):
        x = np.asarray(x, dtype=float)
        return a * np.exp(-s * x * x)

    return NormalizingFunction(chi, chi_prime, ("gaussian", float(s)), f"chi_theta(s={s:g})",
                               Decay("gaussian", float(s), a))


def make_involutive_spline(delta: float) -> NormalizingFunction:
    """sign(x) for |x| >= delta, (15u - 10u^3 + 3u^5)/8 with u = x/delta inside.

    The interior polynomial is the odd quintic with chi(+-delta) = +-1 and
    chi' = chi'' = 0 at +-delta, so chi is C^2 and chi' = (15/8delta)(1-u^2)^2.
    """
    if not delta > 0:
        raise ValueError(f"spline half-width must be positive, got {delta}")
    d = float(delta)

    def chi(x):
        x = np.asarray(x, dtype=float)
        u = np.clip(x / d, -1.0, 1.0)
        return u * (15.0 - 10.0 * u * u + 3.0 * u ** 4) / 8.0

    def chi_prime(x):
        x = np.asarray(x, dtype=float)
        u = np.clip(x / d, -1.0, 1.0)
        return (15.0 / (8.0 * d)) * (1.0 - u * u) ** 2

    return NormalizingFunction(chi, chi_prime, ("compactly-flat", d), f"involutive(delta={d:g})",
                               Decay("compact", d, 15.0 / (8.0 * d)))


def from_spec(spec: dict) -> NormalizingFunction:
    """Build from a config dict such as ``{"family": "chi_p", "p": 2}``."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValueError(f"normalizing function spec needs a 'family' key: {spec!r}")
    fam = spec["family"]
    if fam == "chi_p":
        return make_chi_p(float(spec.get("p", 2)))
    if fam == "chi_theta":
        return make_chi_theta(float(spec.get("s", 1.0)))
    if fam == "involutive":
        return make_involutive_spline(float(spec["delta"]))
    raise ValueError(f"unknown normalizing-function family {fam!r}")
