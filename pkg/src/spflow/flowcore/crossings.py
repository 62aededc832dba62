"""Spectral flow by counting signed zero crossings of sorted eigenvalues.

Sorted eigenvalues of a C^1 Hermitian path are Lipschitz with constant
``max ||D'_t||`` (Weyl).  An interval [t0, t1] is *resolved* when

* exactly one sorted branch changes sign across it (a single crossing), or
  none does, and
* no branch that keeps its sign could have dipped through zero inside,
  i.e. ``|lam_i(t0)| + |lam_i(t1)| > L (t1 - t0)`` for all such branches.

Unresolved intervals are bisected.  The second test only runs to
``touch_depth`` (it is what finds an up/down pair hidden inside one
interval); beyond that, remaining near-zero intervals are logged as touches.
Intervals still holding several sign changes at ``max_depth`` are coincident
crossings and are recorded as clusters with their net count.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError
from ..funcalc import eigvalsh_batch
from .paths import OperatorPath, require_invertible_endpoints
from .report import FlowReport, make_report


def _sample(path: OperatorPath, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam = eigvalsh_batch(path.batch(ts))
    dl = eigvalsh_batch(path.dot_batch(ts))
    speed = np.max(np.abs(dl), axis=1)
    return lam, speed


def spectral_flow_crossings(
    path: OperatorPath,
    initial_samples: int = 65,
    gap_tol: float = 1e-10,
    *,
    max_depth: int = 40,
    touch_depth: int = 10,
    max_samples: int = 200_000,
    lipschitz_safety: float = 2.0,
) -> FlowReport:
    """Net number of eigenvalues crossing zero upward along ``path``.

    Raises:
        NonInvertibleEndpointError: an endpoint has an eigenvalue within
            ``gap_tol`` (relative) of zero.
        ConvergenceError: more than ``max_samples`` evaluations were needed.
    """
    require_invertible_endpoints(path, gap_tol)
    a, b = path.interval
    ts = np.linspace(a, b, max(2, int(initial_samples)))
    lam, speed = _sample(path, ts)
    n_samples = ts.size

    t0, t1 = ts[:-1], ts[1:]
    lam0, lam1 = lam[:-1], lam[1:]
    s0, s1 = speed[:-1], speed[1:]
    depth = np.zeros(t0.size, dtype=int)

    crossings: list[tuple] = []  # (t, dir, lo, hi, branch, n_neg(lo), n_neg(hi))
    clusters: list[dict] = []
    touches = 0
    deepest = 0

    while t0.size:
        neg0, neg1 = lam0 < 0, lam1 < 0
        changed = neg0 != neg1
        nchg = changed.sum(axis=1)
        reach = lipschitz_safety * np.maximum(s0, s1) * (t1 - t0)
        near = (~changed) & (np.abs(lam0) + np.abs(lam1) <= reach[:, None])
        near_any = near.any(axis=1)
        probe = near_any & (depth < touch_depth)

        single = (nchg == 1) & ~probe
        quiet = (nchg == 0) & ~probe
        capped = ~(single | quiet) & (depth >= max_depth)
        split = ~(single | quiet | capped)
        deepest = max(deepest, int(depth.max(initial=0)))

        touches += int(np.sum(quiet & near_any))
        for k in np.flatnonzero(single):
            i = int(np.argmax(changed[k]))
            direction = 1 if neg0[k, i] else -1
            frac = -lam0[k, i] / (lam1[k, i] - lam0[k, i])
            crossings.append((t0[k] + frac * (t1[k] - t0[k]), direction, t0[k], t1[k], i,
                              int(neg0[k].sum()), int(neg1[k].sum())))
        for k in np.flatnonzero(capped):
            net = int(neg0[k].sum() - neg1[k].sum())
            clusters.append({"t": float(0.5 * (t0[k] + t1[k])), "net": net,
                             "sign_changes": int(nchg[k])})

        if not split.any():
            break
        lo, hi = t0[split], t1[split]
        mid = 0.5 * (lo + hi)
        n_samples += mid.size
        if n_samples > max_samples:
            partial = FlowReport("crossings", float("nan"), 0, float("nan"), {},
                                 {"samples": n_samples, "depth": deepest}, True)
            raise ConvergenceError(
                f"crossing oracle needs more than {max_samples} samples (path too wild for the budget)",
                partial,
            )
        lm, sm = _sample(path, mid)
        d = depth[split] + 1
        t0 = np.concatenate([lo, mid])
        t1 = np.concatenate([mid, hi])
        lam0, lam1 = np.concatenate([lam0[split], lm]), np.concatenate([lm, lam1[split]])
        s0, s1 = np.concatenate([s0[split], sm]), np.concatenate([sm, s1[split]])
        depth = np.concatenate([d, d])

    crossings = _confirm(path, crossings)
    crossings.sort()
    n_samples += len(crossings)

    ups = sum(1 for c in crossings if c[1] > 0)
    downs = len(crossings) - ups
    total = ups - downs + sum(c["net"] for c in clusters)
    # consistency with the endpoint count of negative eigenvalues
    net_end = int(np.sum(lam[0] < 0) - np.sum(lam[-1] < 0))
    if total != net_end:
        raise ConvergenceError(f"crossing bookkeeping {total} disagrees with endpoint count {net_end}")

    return make_report(
        "crossings", float(total),
        terms={"up": ups, "down": downs, "clusters": sum(c["net"] for c in clusters)},
        diagnostics={
            "crossings": [[float(t), int(d)] for t, d, *_ in crossings],
            "clusters": clusters,
            "touches": touches,
            "samples": n_samples,
            "depth": deepest,
        },
    )


def _confirm(path, crossings):
    """Bisect each isolated crossing once more and check it stays a single crossing."""
    if not crossings:
        return []
    lo = np.array([c[2] for c in crossings])
    hi = np.array([c[3] for c in crossings])
    mid = 0.5 * (lo + hi)
    lam_mid = eigvalsh_batch(path.batch(mid))
    out = []
    for k, (t, direction, a, b, i, n0, n1) in enumerate(crossings):
        lm = lam_mid[k]
        if int(np.sum(lm < 0)) not in (n0, n1):
            raise ConvergenceError(f"crossing near t={t:.6g} is not stable under refinement")
        # the crossing branch sits in one half; the sign at the midpoint picks it
        if (lm[i] < 0) == (direction > 0):
            a = mid[k]
        else:
            b = mid[k]
        if not a <= t <= b:
            t = 0.5 * (a + b)
        out.append((t, direction))
    return out
