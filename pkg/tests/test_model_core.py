import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from misslab.errors import DegenerateError, SeparationError, SingularError
from misslab.model_core import (fit_linear_gaussian, fit_logistic, logistic_loglik,
                                logistic_prob, logistic_score)

from conftest import synthetic_logit


# independent reference: written from the Bernoulli likelihood, no package code
def ref_loglik(beta, X, y, w=None):
    w = np.ones(len(y)) if w is None else w
    eta = X @ beta
    return float(np.sum(w * (y * eta - np.log1p(np.exp(eta)))))


def ref_score(beta, X, y, w=None):
    w = np.ones(len(y)) if w is None else w
    p = 1.0 / (1.0 + np.exp(-(X @ beta)))
    return X.T @ (w * (y - p))


def grid_argmax(f, lo=-5.0, hi=5.0):
    center = np.array([0.0, 0.0])
    half = (hi - lo) / 2
    for _ in range(12):
        g = np.linspace(-half, half, 41)
        best, arg = -np.inf, None
        for a in g:
            for b in g:
                v = f(center + (a, b))
                if v > best:
                    best, arg = v, center + (a, b)
        center, half = arg, half / 8
    return center


def test_intercept_only_symmetric():
    fit = fit_logistic(np.ones((4, 1)), [0, 1, 0, 1], np.ones(4))
    assert fit.beta[0] == 0.0
    assert fit.converged


def test_eight_row_example_matches_grid_search():
    x = np.array([-2, -1, -1, 0, 0, 1, 1, 2], dtype=float)
    y = np.array([0, 0, 1, 0, 1, 0, 1, 1], dtype=float)
    X = np.column_stack([np.ones(8), x])
    oracle = grid_argmax(lambda b: ref_loglik(b, X, y))
    fit = fit_logistic(X, y, np.ones(8))
    assert_allclose(fit.beta, oracle, atol=1e-3)


def test_unit_weights_are_noop():
    X, y = synthetic_logit(150, 1)
    a = fit_logistic(X, y)
    b = fit_logistic(X, y, np.ones(len(y)))
    assert_allclose(a.beta, b.beta, rtol=0, atol=1e-12)


def test_score_at_optimum_and_covariance_symmetry():
    X, y = synthetic_logit(300, 2)
    fit = fit_logistic(X, y)
    assert np.max(np.abs(ref_score(fit.beta, X, y))) < 1e-8
    assert_allclose(fit.covariance, fit.covariance.T, atol=1e-10)
    assert np.all(np.diag(fit.covariance) >= 0)
    assert fit.n_used == 300


def test_covariance_matches_numerical_hessian():
    X, y = synthetic_logit(200, 3)
    fit = fit_logistic(X, y)
    h = 1e-5
    q = len(fit.beta)
    H = np.empty((q, q))
    for j in range(q):
        e = np.zeros(q)
        e[j] = h
        H[:, j] = (ref_score(fit.beta + e, X, y) - ref_score(fit.beta - e, X, y)) / (2 * h)
    inv = np.linalg.inv(-0.5 * (H + H.T))
    assert_allclose(np.diag(fit.covariance), np.diag(inv), rtol=1e-3)


def test_trace_is_monotone():
    X, y = synthetic_logit(80, 4, beta=(0.3, 2.0, -1.5))
    fit = fit_logistic(X, y)
    assert len(fit.trace) >= 3
    assert np.all(np.diff(fit.trace) >= -1e-9)


def test_row_permutation_invariance():
    X, y = synthetic_logit(120, 5)
    w = np.random.default_rng(0).uniform(0.5, 2.0, len(y))
    perm = np.random.default_rng(1).permutation(len(y))
    a = fit_logistic(X, y, w)
    b = fit_logistic(X[perm], y[perm], w[perm])
    assert_allclose(b.beta, a.beta, rtol=0, atol=1e-12)
    assert_allclose(b.covariance, a.covariance, rtol=0, atol=1e-12)


def test_separation_is_an_error():
    X = np.column_stack([np.ones(6), [-3, -2, -1, 1, 2, 3]])
    with pytest.raises(SeparationError):
        fit_logistic(X, [0, 0, 0, 1, 1, 1])


def test_constant_response_is_degenerate():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    with pytest.raises(DegenerateError):
        fit_logistic(X, np.ones(5))
    # zero-weight rows do not count towards variation in y
    with pytest.raises(DegenerateError):
        fit_logistic(X, [1, 1, 1, 1, 0], [1, 1, 1, 1, 0])


def test_collinear_design_is_singular():
    X, y = synthetic_logit(50, 6)
    X = np.column_stack([X, 2 * X[:, 1]])
    with pytest.raises(SingularError):
        fit_logistic(X, y)


def test_fractional_response_matches_expanded_rows():
    X = np.column_stack([np.ones(4), [0.0, 1.0, 2.0, 3.0]])
    frac = fit_logistic(X, [0.25, 0.5, 0.5, 0.75], [4, 2, 2, 4])
    Xe = np.repeat(X, [4, 2, 2, 4], axis=0)
    ye = np.array([1, 0, 0, 0, 1, 0, 1, 0, 1, 1, 1, 0], dtype=float)
    full = fit_logistic(Xe, ye)
    assert_allclose(frac.beta, full.beta, atol=1e-10)


# -- logistic_prob ------------------------------------------------------------

def test_prob_zero_predictor():
    assert logistic_prob(np.zeros(3), [1.0, 5.0, -2.0]) == 0.5


def test_prob_saturation():
    p = logistic_prob([700.0], [1.0])
    assert 1 - 1e-12 < p <= 1.0
    lo = logistic_prob([-800.0], [1.0])
    assert np.isfinite(lo) and lo < 1e-13
    assert logistic_prob([-31.0], [1.0]) < 1e-13


def test_prob_design_coefficients():
    beta = (-0.96, 0.87, 2.9, -0.086)
    eta = -0.96 + 0.87 + 2.9 - 0.086 * 28
    assert_allclose(eta, 0.402, atol=1e-12)
    assert_allclose(logistic_prob(beta, (1, 1, 1, 28)), 1 / (1 + np.exp(-0.402)), rtol=1e-14)


def test_score_matches_finite_difference():
    X, y = synthetic_logit(40, 7)
    beta = np.array([0.2, -0.4, 0.9])
    h = 1e-5
    num = np.array([(ref_loglik(beta + h * e, X, y) - ref_loglik(beta - h * e, X, y)) / (2 * h)
                    for e in np.eye(3)])
    assert_allclose(logistic_score(beta, X, y), num, rtol=1e-4)
    assert_allclose(logistic_loglik(beta, X, y), ref_loglik(beta, X, y), rtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(8, 60))
def test_gradient_check_random(seed, n):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    y = (rng.random(n) < 0.5).astype(float)
    w = rng.uniform(0.1, 3.0, n)
    beta = rng.normal(0, 1, 3)
    h = 1e-5
    num = np.array([(ref_loglik(beta + h * e, X, y, w) - ref_loglik(beta - h * e, X, y, w)) / (2 * h)
                    for e in np.eye(3)])
    ana = logistic_score(beta, X, y, w)
    assert_allclose(ana, num, rtol=1e-4, atol=1e-6 * np.max(np.abs(num)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 100.0))
def test_score_zero_and_weight_scaling(seed, scale):
    X, y = synthetic_logit(60, seed)
    w = np.random.default_rng(seed).uniform(0.2, 2.0, 60)
    try:
        a = fit_logistic(X, y, w)
    except (SeparationError, DegenerateError, SingularError):
        assume(False)
    assert a.converged
    assert np.max(np.abs(ref_score(a.beta, X, y, w))) < 1e-8
    b = fit_logistic(X, y, scale * w)
    assert_allclose(b.beta, a.beta, rtol=0, atol=1e-10)


# -- fit_linear_gaussian ------------------------------------------------------

def test_linear_intercept_only_hand_arithmetic():
    fit = fit_linear_gaussian(np.ones((3, 1)), [1.0, 2.0, 3.0], np.ones(3))
    assert_allclose(fit.beta, [2.0])
    assert_allclose(fit.sigma**2, 1.0)
    assert fit.df_resid == 2


def test_linear_exact_fit():
    x = np.arange(5.0)
    fit = fit_linear_gaussian(np.column_stack([np.ones(5), x]), 1.5 + 2 * x)
    assert_allclose(fit.beta, [1.5, 2.0], atol=1e-12)
    assert fit.sigma < 1e-12
    with pytest.raises(DegenerateError):
        fit_linear_gaussian(np.column_stack([np.ones(2), [0.0, 1.0]]), [1.0, 3.0])


def test_linear_duplicated_half_weight_rows():
    rng = np.random.default_rng(8)
    X = np.column_stack([np.ones(30), rng.standard_normal(30)])
    y = X @ [1.0, -2.0] + rng.standard_normal(30)
    a = fit_linear_gaussian(X, y)
    b = fit_linear_gaussian(np.vstack([X, X]), np.concatenate([y, y]), np.full(60, 0.5))
    assert_allclose(b.beta, a.beta, rtol=0, atol=1e-12)


def test_linear_rank_deficient():
    X = np.column_stack([np.ones(6), np.arange(6.0), 2 * np.arange(6.0)])
    with pytest.raises(SingularError):
        fit_linear_gaussian(X, np.arange(6.0))


def test_linear_matches_lstsq():
    rng = np.random.default_rng(9)
    X = np.column_stack([np.ones(40), rng.standard_normal((40, 2))])
    y = rng.standard_normal(40)
    w = rng.uniform(0.5, 2, 40)
    sw = np.sqrt(w)
    ref, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    fit = fit_linear_gaussian(X, y, w)
    assert_allclose(fit.beta, ref, atol=1e-12)
    assert_allclose(fit.sigma**2, np.sum(w * (y - X @ ref) ** 2) / 37, rtol=1e-12)
