import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spflow.errors import (
    ConvergenceError,
    HypothesisError,
    IndexMismatchError,
    NonInvertibleEndpointError,
)
from spflow.flowcore import (
    FlowReport,
    OperatorPath,
    ProjectionPair,
    UnitaryLoop,
    diagonal_phase_loop,
    endpoint_term,
    fredholm_index,
    integrate_trace,
    make_report,
    relative_index,
    reverse,
    segment_path,
    spectral_flow_corollary,
    spectral_flow_crossings,
    spectral_flow_integral,
    spectral_flow_via_winding,
    winding_number,
)
from spflow.funcalc import Projection
from spflow.models import make_crossing_path, make_random_path, random_projection, random_unitary
from spflow.normfun import make_chi_p, make_chi_theta, make_involutive_spline
from spflow.quad import Decay

from conftest import rand_herm

CHIS = [make_chi_p(1), make_chi_p(2), make_chi_p(1.5), make_chi_theta(1.0), make_involutive_spline(0.2)]


def line(slope=1.0, offset=-0.25):
    return OperatorPath.affine(np.array([[offset]]), np.array([[slope]]))


# -- reports

def test_report_grading():
    r = make_report("x", 2.001)
    assert r.integer == 2 and r.flagged
    assert not make_report("x", -0.999999999).flagged
    with pytest.raises(ConvergenceError) as info:
        make_report("x", 0.5)
    assert isinstance(info.value.partial, FlowReport)
    d = make_report("x", 1.0, {"integral": 1.0}).to_dict()
    assert set(d) >= {"value", "integer", "residual", "terms", "diagnostics"}


# -- crossing oracle

def test_crossings_single_upward():
    r = spectral_flow_crossings(line())
    assert r.integer == 1 and r.residual == 0
    (t, d), = r.diagnostics["crossings"]
    assert t == pytest.approx(0.25, abs=1e-9) and d == 1


def test_crossings_constant_path():
    p = OperatorPath.affine(np.diag([1.0, -2.0]), np.zeros((2, 2)))
    assert spectral_flow_crossings(p).integer == 0


def test_crossings_up_and_down_cancel():
    p = OperatorPath.affine(np.diag([-0.25, 0.25]), np.diag([1.0, -1.0]))
    r = spectral_flow_crossings(p)
    assert r.integer == 0
    assert r.terms["up"] == 1 and r.terms["down"] == 1


def test_crossings_hidden_pair_inside_one_sample_interval():
    # an eigenvalue dipping below zero on (0.5, 0.5 + 1e-3) between two coarse samples
    f = lambda t: (t - 0.5) * (t - 0.501)  # noqa: E731
    p = OperatorPath.from_function(lambda t: np.array([[f(t)]]), (0.0, 1.0),
                                   lambda t: np.array([[2 * t - 1.001]]))
    r = spectral_flow_crossings(p, initial_samples=5)
    assert r.integer == 0 and r.terms["down"] == 1 and r.terms["up"] == 1


def test_crossings_reject_singular_endpoint():
    with pytest.raises(NonInvertibleEndpointError):
        spectral_flow_crossings(line(offset=0.0))


@pytest.mark.parametrize("spec,expected", [
    ([(0.25, 1)], 1), ([(0.3, 1), (0.7, -1)], 0), ([(0.2, 1), (0.5, 1), (0.8, 1)], 3),
])
def test_crossing_path_generator(spec, expected):
    s = make_crossing_path(spec)
    assert s.expected_flow == expected == spectral_flow_crossings(s.path).integer


# -- winding numbers

def test_winding_scalar_and_constant():
    assert winding_number(diagonal_phase_loop([1])).value == pytest.approx(1.0, abs=1e-12)
    const = UnitaryLoop(lambda xs: np.broadcast_to(np.eye(2, dtype=complex), (len(xs), 2, 2)), 2)
    assert winding_number(const).integer == 0


@pytest.mark.parametrize("k1,k2", [(2, -1), (-3, -3), (0, 3)])
def test_winding_diagonal(k1, k2):
    r = winding_number(diagonal_phase_loop([k1, k2]))
    assert r.integer == k1 + k2 and r.residual < 1e-8


def _no_derivative(loop):
    return UnitaryLoop(loop.func, loop.dim)


@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3))
def test_winding_additive_under_products(a, b, c):
    s, t = diagonal_phase_loop([a, b]), diagonal_phase_loop([c, -a])
    prod = UnitaryLoop(lambda xs: s.func(xs) @ t.func(xs), 2)
    ws, wt = winding_number(s).integer, winding_number(t).integer
    assert winding_number(prod).integer == ws + wt == a + b + c - a


def test_winding_by_finite_differences_and_conjugation():
    rng = np.random.default_rng(1)
    U = random_unitary(3, rng)
    base = diagonal_phase_loop([2, -1, 1])
    loop = UnitaryLoop(lambda xs: U @ base.func(xs) @ U.conj().T, 3)
    r = winding_number(loop)
    assert r.integer == 2 and r.residual < 1e-6
    assert r.diagnostics["derivative"] == "five-point"


def test_winding_rejects_open_loop():
    open_loop = UnitaryLoop(lambda xs: np.exp(1j * np.pi * np.asarray(xs))[:, None, None], 1)
    with pytest.raises(ValueError):
        winding_number(open_loop)


def test_winding_undersampled_fails():
    loop = _no_derivative(diagonal_phase_loop([40]))
    with pytest.raises(ConvergenceError) as info:
        winding_number(loop, quad_points=8, max_points=32)
    assert isinstance(info.value.partial, FlowReport)


def test_flow_via_winding_examples():
    assert spectral_flow_via_winding(line(), delta=0.2).integer == 1
    const = OperatorPath.affine(np.diag([1.0, -1.0]), np.zeros((2, 2)))
    assert spectral_flow_via_winding(const).value == pytest.approx(0.0, abs=1e-12)
    assert spectral_flow_via_winding(reverse(line())).integer == -1


def test_flow_via_winding_rejects_wide_delta():
    with pytest.raises(ValueError):
        spectral_flow_via_winding(line(), delta=0.3)


def test_flow_via_winding_default_delta():
    r = spectral_flow_via_winding(line())
    assert r.diagnostics["delta"] == pytest.approx(0.125)


# -- integral formula

@pytest.mark.parametrize("chi", CHIS, ids=lambda c: c.label)
def test_integral_telescopes_on_line(chi):
    r = spectral_flow_integral(line(), chi, tol=1e-12)
    assert abs(r.value - 1) < 1e-10
    assert sum(r.terms.values()) == pytest.approx(r.value, abs=1e-15)


def test_integral_line_terms_by_hand():
    chi = make_chi_p(2)
    r = spectral_flow_integral(line(), chi, tol=1e-12)
    c = chi.chi
    assert r.terms["integral"] == pytest.approx(0.5 * (c(0.75) - c(-0.25)), abs=1e-12)
    assert r.terms["endpoint_b"] == pytest.approx(0.5 * (1 - c(0.75)), abs=1e-15)
    assert r.terms["endpoint_a"] == pytest.approx(0.5 * (1 + c(-0.25)), abs=1e-15)


@pytest.mark.parametrize("chi", CHIS[:3], ids=lambda c: c.label)
def test_integral_constant_path(chi, rng):
    p = OperatorPath.affine(rand_herm(rng, 4) + 0.1 * np.eye(4), np.zeros((4, 4)))
    r = spectral_flow_integral(p, chi)
    assert r.value == pytest.approx(0.0, abs=1e-14)


def test_endpoint_term_scalar():
    assert endpoint_term(np.array([[2.0]]), lambda x: x / np.sqrt(1 + x * x)) == pytest.approx(
        0.5 * (1 - 2 / math.sqrt(5)))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_integral_matches_oracle_random_8dim(seed):
    p = make_random_path(8, seed, degree=2).path
    r = spectral_flow_integral(p, make_chi_p(2))
    assert r.integer == spectral_flow_crossings(p).integer and r.residual < 1e-6


def test_integral_rejects_non_normalizing():
    from spflow.normfun import NormalizingFunction
    bad = NormalizingFunction(np.sin, np.cos, ("polynomial", 1.0), "sin")
    with pytest.raises(HypothesisError):
        spectral_flow_integral(line(), bad)


def test_integral_budget_exhaustion_carries_partial():
    p = make_random_path(6, 4, degree=3).path
    with pytest.raises(ConvergenceError) as info:
        spectral_flow_integral(p, make_chi_p(2), tol=1e-14, max_evals=150)
    assert info.value.partial.flagged


@given(st.integers(0, 2**31), st.integers(2, 6))
def test_conjugation_invariance_of_trace_integral(seed, dim):
    from spflow.models import conjugate_scenario
    s = make_random_path(dim, seed % 5000, degree=2)
    c = conjugate_scenario(s, seed)
    chi = make_chi_p(2)
    a = integrate_trace(s.path, chi.chi_prime, 1e-10).value
    b = integrate_trace(c.path, chi.chi_prime, 1e-10).value
    assert abs(a - b) < 1e-8


# -- corollary

def test_corollary_constant_identity():
    p = OperatorPath.affine(np.diag([1.0, -0.5]), np.zeros((2, 2)))
    p = OperatorPath(p.func, p.interval, 2, p.derivative, unitary=np.eye(2))
    r = spectral_flow_corollary(p, lambda z: 1 / (1 + z * z), norm_constant=math.pi)
    assert r.value == 0.0


def _loop_4dim():
    """D_a = D_b; one eigenvalue rises through 0 while another falls through 0."""
    lam_a = np.array([-1.5, -0.5, 0.5, 1.5])
    lam_b = np.array([-0.5, 0.5, -1.5, 1.5])  # same spectrum, permuted
    rng = np.random.default_rng(3)
    W = random_unitary(4, rng)
    perm = np.eye(4)[:, [2, 0, 1, 3]]  # perm diag(lam_a) perm^T = diag(lam_b)

    def func(ts):
        ts = np.atleast_1d(ts)
        lam = (1 - ts)[:, None] * lam_a + ts[:, None] * lam_b
        return (W[None] * lam[:, None, :]) @ W.conj().T[None]

    U = W @ perm @ W.conj().T
    return OperatorPath(func, (0.0, 1.0), 4, None, "loop4", unitary=U)


def test_corollary_on_finite_loop_matches_oracle():
    p = _loop_4dim()
    r = spectral_flow_crossings(p)
    assert r.terms["up"] == 1 and r.terms["down"] == 1 and r.integer == 0
    chi = make_chi_p(2)
    c = spectral_flow_corollary(p, chi.chi_prime, decay=chi.prime_decay)
    assert c.integer == 0 and c.residual < 1e-6


def test_corollary_needs_equivalent_ends():
    with pytest.raises(HypothesisError):
        spectral_flow_corollary(line(), lambda z: np.exp(-z * z), decay=Decay("gaussian", 1.0))


def test_corollary_rejects_odd_psi():
    p = _loop_4dim()
    with pytest.raises(HypothesisError):
        spectral_flow_corollary(p, lambda z: np.exp(-(z - 1) ** 2), norm_constant=1.0)


# -- relative index

def test_relative_index_diagonal():
    pair = ProjectionPair.from_matrices(np.diag([1.0, 1.0, 0.0]), np.diag([1.0, 0.0, 0.0]))
    assert relative_index(pair) == 1
    assert spectral_flow_crossings(segment_path(pair)).integer == 1


def test_relative_index_equal_projections(rng):
    P = random_projection(5, 2, rng)
    pair = ProjectionPair.from_matrices(P, P)
    assert relative_index(pair) == 0
    seg = segment_path(pair)
    np.testing.assert_allclose(seg(0.0), seg(0.7), atol=1e-14)


def test_relative_index_small_rotation(rng):
    P = random_projection(8, 3, rng)
    H = rand_herm(rng, 8, 1e-2)
    w, V = np.linalg.eigh(H)
    R = (V * np.exp(1j * w)) @ V.conj().T
    pair = ProjectionPair.from_matrices(P, R @ P @ R.conj().T)
    assert relative_index(pair) == 0


def test_relative_index_orthogonal_lines():
    pair = ProjectionPair.from_matrices(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    assert relative_index(pair) == 0
    assert spectral_flow_crossings(segment_path(pair)).integer == 0


def test_fredholm_index_ignores_rank_threshold():
    # in finite dimensions dim ker - dim coker = rank P - rank Q for any threshold
    P = Projection.onto(np.array([1.0, 1.0, 0.0]))
    Q = Projection.from_matrix(np.diag([1.0, 0.0, 1.0]))
    for tol in (1e-12, 0.5, 2.0):
        assert fredholm_index(ProjectionPair(P, Q), sv_tol=tol) == -1


def test_relative_index_mismatch_surfaces(monkeypatch):
    from spflow.flowcore import index as index_mod
    monkeypatch.setattr(index_mod, "fredholm_index", lambda pair, sv_tol: 5)
    pair = ProjectionPair.from_matrices(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    with pytest.raises(IndexMismatchError):
        index_mod.relative_index(pair)


@given(st.integers(0, 2**31), st.integers(1, 8), st.integers(0, 8), st.integers(0, 8))
def test_relative_index_triple(seed, n, r1, r2):
    rng = np.random.default_rng(seed)
    P = random_projection(n, min(r1, n), rng)
    Q = random_projection(n, min(r2, n), rng)
    pair = ProjectionPair.from_matrices(P, Q)
    tr = round(np.trace(P - Q).real)
    assert relative_index(pair) == tr == fredholm_index(pair)
    assert spectral_flow_crossings(segment_path(pair)).integer == tr
