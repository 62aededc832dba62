import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spflow.errors import DomainError, NotHermitianError
from spflow.funcalc import (
    Projection,
    apply_function,
    eigh,
    matrix_from_json,
    matrix_to_json,
    schatten_norm,
    spectral_projection_nonneg,
)

from conftest import rand_herm

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=1, max_value=8)


def test_eigh_diagonal_sorted():
    dec = eigh(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(dec.eigenvalues, [1.0, 2.0])


def test_eigh_identity():
    dec = eigh(np.eye(3))
    np.testing.assert_allclose(dec.eigenvalues, [1, 1, 1])
    U = dec.eigenvectors
    np.testing.assert_allclose(U.conj().T @ U, np.eye(3), atol=1e-12)


def test_eigh_flip():
    np.testing.assert_allclose(eigh([[0, 1], [1, 0]]).eigenvalues, [-1, 1], atol=1e-15)


def test_eigh_rejects_non_hermitian():
    with pytest.raises(NotHermitianError) as info:
        eigh([[0, 1], [0.5, 0]])
    assert info.value.asymmetry == pytest.approx(0.5)


@given(seeds, dims)
def test_decomposition_invariants(seed, n):
    A = rand_herm(np.random.default_rng(seed), n)
    dec = eigh(A)
    U = dec.eigenvectors
    assert np.linalg.norm(dec.reconstruct() - A, 2) <= 1e-10 * max(1, np.linalg.norm(A, 2))
    assert np.max(np.abs(U.conj().T @ U - np.eye(n))) <= 1e-10
    assert np.all(np.diff(dec.eigenvalues) >= 0)


def test_apply_identity_and_square(rng):
    A = rand_herm(rng, 5)
    np.testing.assert_allclose(apply_function(A, lambda x: x), A, atol=1e-10)
    np.testing.assert_allclose(apply_function(np.diag([3.0, -2.0]), lambda x: x**2),
                               np.diag([9.0, 4.0]), atol=1e-12)


def test_apply_chi2_scalar():
    out = apply_function(np.array([[1.0]]), lambda x: x / np.sqrt(1 + x * x))
    assert out[0, 0].real == pytest.approx(2**-0.5, abs=1e-15)


def test_apply_domain_error():
    with pytest.raises(DomainError):
        apply_function(np.diag([1.0, -1.0]), np.log)


@given(seeds, dims, st.lists(st.floats(-2, 2), min_size=1, max_size=4))
def test_spectral_mapping_polynomial(seed, n, coeffs):
    A = rand_herm(np.random.default_rng(seed), n)
    f = np.polynomial.Polynomial(coeffs)
    lam = np.linalg.eigvalsh(A)
    got = np.linalg.eigvalsh(apply_function(A, f))
    np.testing.assert_allclose(got, np.sort(f(lam)), atol=1e-9 * max(1, np.max(np.abs(f(lam)))))
    assert np.trace(apply_function(A, f)).real == pytest.approx(np.sum(f(lam)), abs=1e-9 * max(1, np.sum(np.abs(f(lam)))))


def test_schatten_examples(rng):
    assert schatten_norm(np.eye(4), 1) == pytest.approx(4.0)
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    P = Projection.onto(v).matrix
    for p in (1, 1.5, 2, 7, np.inf):
        assert schatten_norm(P, p) == pytest.approx(1.0)
    assert schatten_norm(np.diag([3.0, 4.0]), 2) == pytest.approx(5.0)


def test_schatten_rejects_small_p():
    with pytest.raises(ValueError):
        schatten_norm(np.eye(2), 0.5)


@given(seeds, dims)
def test_schatten_two_is_frobenius_and_monotone(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    assert schatten_norm(A, 2) ** 2 == pytest.approx(np.trace(A.conj().T @ A).real, rel=1e-9)
    norms = [schatten_norm(A, p) for p in (1, 1.5, 2, 3, 10, np.inf)]
    assert all(x >= y * (1 - 1e-12) for x, y in zip(norms, norms[1:]))


def test_projection_nonneg_examples():
    P = spectral_projection_nonneg(np.diag([1.0, -1.0]))
    np.testing.assert_allclose(P.matrix, np.diag([1.0, 0.0]), atol=1e-15)
    assert spectral_projection_nonneg(-np.eye(3)).rank == 0
    P = spectral_projection_nonneg(np.diag([0.0, -2.0, 3.0]))
    assert P.rank == 2 and P.near_zero == 1
    np.testing.assert_allclose(P.matrix, np.diag([1.0, 0.0, 1.0]), atol=1e-15)


@given(seeds, st.integers(2, 8), st.integers(0, 3))
def test_projections_of_A_and_minus_A_cover_kernel(seed, n, k):
    # exact zeros: invertible block plus a zero block, coordinates shuffled
    rng = np.random.default_rng(seed)
    k = min(k, n - 1)
    m = n - k
    lam = rng.uniform(0.5, 2.0, m) * rng.choice([-1, 1], m)
    X = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    U, _ = np.linalg.qr(X)
    A = np.zeros((n, n), dtype=complex)
    A[:m, :m] = (U * lam) @ U.conj().T
    perm = rng.permutation(n)
    A = A[np.ix_(perm, perm)]
    ker = np.diag((perm >= m).astype(float))
    total = spectral_projection_nonneg(A).matrix + spectral_projection_nonneg(-A).matrix
    np.testing.assert_allclose(total, np.eye(n) + ker, atol=1e-9)


def test_projection_invariants(rng):
    A = rand_herm(rng, 7)
    P = spectral_projection_nonneg(A)
    M = P.matrix
    assert np.max(np.abs(M @ M - M)) <= 1e-10
    assert abs(np.trace(M).real - P.rank) < 1e-8
    Projection.from_matrix(M)


def test_projection_from_matrix_rejects():
    with pytest.raises(ValueError):
        Projection.from_matrix(np.diag([0.5, 1.0]))


def test_matrix_json_roundtrip(rng):
    A = rand_herm(rng, 4)
    np.testing.assert_array_equal(matrix_from_json(matrix_to_json(A)), A)
    with pytest.raises(ValueError):
        matrix_from_json([[1, 2]])
