import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import betainc, erf

from spflow.normfun import (
    NormalizingFunction,
    fitted_envelope_constant,
    from_spec,
    make_chi_p,
    make_chi_theta,
    make_involutive_spline,
    standard_grid,
    validate_normalizing,
)

GRID = standard_grid()
WIDE = np.linspace(-400.0, 400.0, 80001)


def chi_p_oracle(p, x):
    """chi_p through the regularized incomplete beta function (independent of the package)."""
    x = np.asarray(x, dtype=float)
    u = x * x / (1 + x * x)
    return np.sign(x) * betainc(0.5, p / 2, u)


@pytest.mark.parametrize("p", [1, 1.5, 2, 3])
def test_chi_p_passes_validation(p):
    rep = validate_normalizing(make_chi_p(p), GRID)
    assert rep.passed, str(rep)


@pytest.mark.parametrize("s", [0.5, 1, 2])
def test_chi_theta_passes_validation(s):
    rep = validate_normalizing(make_chi_theta(s), GRID)
    assert rep.passed, str(rep)


@pytest.mark.parametrize("delta", [0.05, 0.25, 1.0])
def test_spline_passes_validation(delta):
    assert make_involutive_spline(delta).validation.passed


def test_chi_1_closed_form():
    f = make_chi_p(1)
    assert f.chi(1.0) == pytest.approx(0.5, abs=1e-15)
    # C_1 = pi: chi_1'(0) = 2 / C_1
    assert f.chi_prime(0.0) == pytest.approx(2 / math.pi, abs=1e-15)


def test_chi_2_closed_form_on_grid():
    x = np.linspace(-50, 50, 10_000)
    f = make_chi_p(2)
    assert np.max(np.abs(f.chi(x) - x / np.sqrt(1 + x * x))) <= 1e-12
    assert f.chi_prime(0.0) == pytest.approx(1.0)  # C_2 = 2


@pytest.mark.parametrize("p", [1, 1.5, 2, 2.5, 3, 4.2])
def test_chi_p_matches_beta_oracle(p):
    x = np.linspace(-30, 30, 2001)
    assert np.max(np.abs(make_chi_p(p).chi(x) - chi_p_oracle(p, x))) < 1e-11
    assert make_chi_p(p).chi(0.0) == 0.0


@pytest.mark.parametrize("p", [1.5, 3, 5])
def test_chi_p_normalizer_against_gamma(p):
    # C_p = sqrt(pi) Gamma(p/2) / Gamma((p+1)/2)
    Cp = math.sqrt(math.pi) * math.gamma(p / 2) / math.gamma((p + 1) / 2)
    assert make_chi_p(p).chi_prime(0.0) == pytest.approx(2 / Cp, rel=1e-11)


def test_chi_p_rejects_small_p():
    with pytest.raises(ValueError):
        make_chi_p(0.5)


def test_chi_theta_values():
    f = make_chi_theta(1.0)
    assert f.chi(0.0) == 0.0
    # Taylor series of erf at 1, independent of scipy
    series = 2 / math.sqrt(math.pi) * sum((-1) ** n / (math.factorial(n) * (2 * n + 1)) for n in range(30))
    assert f.chi(1.0) == pytest.approx(series, abs=1e-15)
    assert f.chi(1.0) == pytest.approx(0.84270079, abs=1e-8)
    assert abs(f.chi(6.0) - 1) < 1e-15
    with pytest.raises(ValueError):
        make_chi_theta(0.0)


def test_spline_shape():
    d = 0.3
    f = make_involutive_spline(d)
    assert f.chi(2 * d) == 1.0 and f.chi(-2 * d) == -1.0
    assert f.chi(0.0) == 0.0 and f.chi_prime(0.0) > 0
    assert f.chi(d) == pytest.approx(1.0) and f.chi_prime(d) == 0.0
    h = 1e-7
    for x0 in (-d, d):
        left = (f.chi(x0 - h) - f.chi(x0 - 2 * h)) / h
        right = (f.chi(x0 + 2 * h) - f.chi(x0 + h)) / h
        assert abs(left - right) < 1e-6


def test_spline_makes_involutions():
    d = 0.2
    f = make_involutive_spline(d)
    lam = np.array([-3.0, -0.21, 0.5, 2.0])
    assert np.all(f.chi(lam) ** 2 == 1.0)


def test_validator_accepts_algebraic_normalizer():
    f = NormalizingFunction(lambda x: x / (1 + np.abs(x)), lambda x: 1 / (1 + np.abs(x)) ** 2,
                            ("polynomial", 1.0), "x/(1+|x|)")
    assert validate_normalizing(f).passed


def test_validator_rejects_sine():
    rep = validate_normalizing(NormalizingFunction(np.sin, np.cos, ("polynomial", 1.0), "sin"))
    failed = rep.failed()
    assert "zero set {0}" in failed and "limits -1/+1" in failed


def test_validator_catches_wrong_derivative():
    f = NormalizingFunction(lambda x: np.tanh(x), lambda x: 1.1 / np.cosh(x) ** 2,
                            ("gaussian", 1.0), "tanh-bad")
    assert validate_normalizing(f).failed() == ["finite-difference chi' agreement"]


def test_validator_needs_wide_grid():
    with pytest.raises(ValueError):
        validate_normalizing(make_chi_p(2), np.linspace(-10, 10, 101))


# -- decay envelopes: constants fitted on [-50, 50] keep working on [-400, 400]

def step(x):
    """2 * 1_{>=0}(x) - 1."""
    return np.where(x >= 0, 1.0, -1.0)


def _holds(val, env, C):
    keep = env > 1e-250
    return bool(np.all(val[keep] <= C * env[keep] * (1 + 1e-9)))


@pytest.mark.parametrize("p", [1, 1.5, 2, 3])
def test_chi_p_envelopes(p):
    f = make_chi_p(p)
    env = lambda x: (1 + x * x) ** (-p / 2)  # noqa: E731
    dist = lambda x: np.abs(step(x) - f.chi(x))  # noqa: E731
    C = 2 * fitted_envelope_constant(dist(GRID), env(GRID))
    # |chi^2 - 1| <= 2 |sign - chi| <= C phi
    assert np.all(np.abs(f.chi(WIDE) ** 2 - 1) <= 2 * dist(WIDE) + 1e-15)
    assert _holds(2 * dist(WIDE), env(WIDE), C)
    # (|x|+1) chi' <= C' phi, and chi' <= (2/C_p) phi exactly
    Cd = fitted_envelope_constant((np.abs(GRID) + 1) * f.chi_prime(GRID), env(GRID))
    assert _holds((np.abs(WIDE) + 1) * f.chi_prime(WIDE), env(WIDE), Cd)
    assert _holds(f.chi_prime(WIDE), env(WIDE), f.chi_prime(0.0))


@pytest.mark.parametrize("s", [0.5, 1, 2])
def test_chi_theta_envelopes(s):
    f = make_chi_theta(s)
    env = lambda x: np.exp(-s * x * x)  # noqa: E731
    dist = lambda x: np.abs(step(x) - f.chi(x))  # noqa: E731
    C = fitted_envelope_constant(dist(GRID), env(GRID))
    assert _holds(dist(WIDE), env(WIDE), C)
    Cd = fitted_envelope_constant(f.chi_prime(GRID), env(GRID))
    assert _holds(f.chi_prime(WIDE), env(WIDE), Cd)


@given(st.floats(min_value=1.0, max_value=6.0))
def test_chi_p_is_odd_and_bounded(p):
    f = make_chi_p(p)
    x = np.linspace(0, 40, 401)
    c = f.chi(x)
    np.testing.assert_allclose(f.chi(-x), -c, atol=1e-15)
    assert np.all(np.abs(c) <= 1.0) and np.all(np.diff(c) >= 0)


@given(st.floats(min_value=0.05, max_value=5.0), st.floats(min_value=-10, max_value=10))
def test_chi_theta_against_scipy_erf(s, x):
    assert make_chi_theta(s).chi(x) == pytest.approx(erf(math.sqrt(s) * x), abs=1e-15)


def test_from_spec():
    assert from_spec({"family": "chi_p", "p": 2}).label == "chi_p(p=2)"
    assert from_spec({"family": "chi_theta", "s": 1.0}).decay_class == ("gaussian", 1.0)
    assert from_spec({"family": "involutive", "delta": 0.25}).decay_class == ("compactly-flat", 0.25)
    with pytest.raises(ValueError):
        from_spec({"family": "tanh"})
