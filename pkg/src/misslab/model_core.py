"""Weighted maximum-likelihood fits for logistic and Gaussian-linear models.

Every estimator in the package is built on the two fitters here.  The
intercept is always an explicit first column of the design matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DegenerateError, SeparationError, SingularError

SCORE_TOL = 1e-8
MAX_ITER = 50
MAX_HALVINGS = 10
DIVERGENCE_BOUND = 1e4
# |eta| beyond this on a fitted row means a probability within ~1e-13 of 0/1
SATURATION_ETA = 30.0
PIVOT_RTOL = 1e-12
LL_RTOL = 1e-13


@dataclass(frozen=True)
class GlmFit:
    """Result of a weighted logistic fit.

    ``covariance`` is the inverse weighted observed information at ``beta``;
    ``trace`` is the log-likelihood after each accepted IRLS step.
    """

    beta: np.ndarray
    covariance: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    n_used: int
    trace: tuple = field(default=(), repr=False)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


@dataclass(frozen=True)
class LinearGaussianFit:
    """Weighted least-squares fit of a Gaussian-identity model."""

    beta: np.ndarray
    sigma: float
    xtx_inverse: np.ndarray
    n_used: int
    df_resid: int


def _sym_eig(a: np.ndarray):
    """Eigendecomposition with a relative-pivot singularity check."""
    a = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(a)
    top = vals[-1]
    if not np.isfinite(top) or top <= 0 or vals[0] <= PIVOT_RTOL * top:
        raise SingularError(
            f"information matrix is numerically singular "
            f"(eigenvalue ratio {vals[0] / top if top > 0 else 0.0:.3g})"
        )
    return vals, vecs


def _irls_eig(info, X, w, ridge):
    """Like :func:`_sym_eig`, but names the cause when the information collapses.

    If ``X' W X`` is well conditioned while the IRLS information is not, the
    collapse comes from fitted probabilities saturating at 0 or 1.
    """
    try:
        return _sym_eig(info)
    except SingularError:
        if ridge:
            raise
        _sym_eig((X.T * w) @ X)
        raise SeparationError(
            "information collapsed as fitted probabilities saturated (separation)"
        ) from None


def _solve(vals, vecs, b):
    return vecs @ ((vecs.T @ b) / vals)


def _inverse(vals, vecs):
    inv = (vecs / vals) @ vecs.T
    return 0.5 * (inv + inv.T)


def _check_inputs(X, y, w):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("design matrix must be two-dimensional")
    if w is None:
        w = np.ones(len(y))
    w = np.asarray(w, dtype=float)
    if not (X.shape[0] == len(y) == len(w)):
        raise ValueError(
            f"row mismatch: X has {X.shape[0]} rows, y {len(y)}, w {len(w)}"
        )
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design and response must be finite")
    return X, y, w


def logistic_prob(beta, z) -> np.ndarray | float:
    """P(Y = 1 | z) under the logit link; accepts a row or a matrix of rows."""
    return expit(np.asarray(z, dtype=float) @ np.asarray(beta, dtype=float))


def logistic_loglik(beta, X, y, w=None) -> float:
    """Weighted Bernoulli log-likelihood ``sum w (y eta - log(1 + e^eta))``."""
    X, y, w = _check_inputs(X, y, w)
    eta = X @ np.asarray(beta, dtype=float)
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def logistic_score(beta, X, y, w=None) -> np.ndarray:
    """Weighted score ``sum w x (y - pi)``."""
    X, y, w = _check_inputs(X, y, w)
    return X.T @ (w * (y - expit(X @ np.asarray(beta, dtype=float))))


def fit_logistic(
    X,
    y,
    w=None,
    *,
    beta0=None,
    ridge: float = 0.0,
    tol: float = SCORE_TOL,
    max_iter: int = MAX_ITER,
) -> GlmFit:
    """Fit a weighted logistic regression by IRLS with step-halving.

    Parameters
    ----------
    X : (n, q) array
        Design matrix, intercept included as a column.
    y : (n,) array
        Responses in [0, 1].  Fractional values are treated as binomial
        proportions, which lets the EM M-step collapse pseudo-rows.
    w : (n,) array, optional
        Nonnegative case weights; rows with zero weight are ignored.
    beta0 : array, optional
        Starting value (zeros by default).
    ridge : float
        Added to the information diagonal (and as an L2 penalty on the
        log-likelihood).  Only used as the imputation fallback.

    Raises
    ------
    DegenerateError
        ``y`` is constant over the positive-weight rows.
    SeparationError
        Coefficients exceed the divergence bound, or an unpenalized fit
        saturates (fitted probabilities at 0/1, or the information collapses
        while the design is full rank).
    SingularError
        The weighted design itself is numerically rank-deficient.
    """
    X, y, w = _check_inputs(X, y, w)
    if np.any((y < 0) | (y > 1)):
        raise ValueError("logistic response must lie in [0, 1]")
    keep = w > 0
    if not keep.all():
        X, y, w = X[keep], y[keep], w[keep]
    n_used = int(keep.sum())
    if n_used == 0 or (ridge == 0.0 and (np.all(y == 0) or np.all(y == 1))):
        raise DegenerateError("response is constant on the positive-weight rows")

    q = X.shape[1]
    beta = np.zeros(q) if beta0 is None else np.array(beta0, dtype=float)
    wy = w * y

    def loglik(b):
        eta = X @ b
        ll = float(wy @ eta - w @ np.logaddexp(0.0, eta))
        return ll - 0.5 * ridge * float(b @ b)

    ll = loglik(beta)
    trace = [ll]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        mu = expit(X @ beta)
        score = X.T @ (wy - w * mu) - ridge * beta
        info = (X.T * (w * mu * (1.0 - mu))) @ X
        if ridge:
            info[np.diag_indices(q)] += ridge
        vals, vecs = _irls_eig(info, X, w, ridge)
        step = _solve(vals, vecs, score)
        if np.max(np.abs(score)) < tol:
            # one Newton polish so fits that differ only in weight scale
            # land on the same machine-precision root
            cand = beta + step
            ll_c = loglik(cand)
            if ll_c >= ll - LL_RTOL * (1.0 + abs(ll)):
                beta, ll = cand, ll_c
            converged = True
            break
        cand = beta + step
        ll_c = loglik(cand)
        # near the optimum the log-likelihood change is below rounding noise
        floor = ll - LL_RTOL * (1.0 + abs(ll))
        halvings = 0
        while not (ll_c >= floor) and halvings < MAX_HALVINGS:
            step = 0.5 * step
            cand = beta + step
            ll_c = loglik(cand)
            halvings += 1
        if np.max(np.abs(cand)) > DIVERGENCE_BOUND:
            raise SeparationError(
                f"coefficients diverged (|beta|_inf > {DIVERGENCE_BOUND:g})"
            )
        if not (ll_c >= floor):
            # step-halving exhausted: no ascent direction left at this precision
            break
        beta, ll = cand, ll_c
        trace.append(ll)

    eta = X @ beta
    if ridge == 0.0 and np.max(np.abs(eta)) > SATURATION_ETA:
        raise SeparationError(
            "fitted probabilities numerically 0 or 1 (separation)"
        )
    mu = expit(eta)
    info = (X.T * (w * mu * (1.0 - mu))) @ X
    if ridge:
        info[np.diag_indices(q)] += ridge
    vals, vecs = _irls_eig(info, X, w, ridge)
    return GlmFit(
        beta=beta,
        covariance=_inverse(vals, vecs),
        loglik=ll,
        iterations=iterations,
        converged=converged,
        n_used=n_used,
        trace=tuple(trace),
    )


def fit_linear_gaussian(X, y, w=None) -> LinearGaussianFit:
    """Weighted least squares with ``sigma**2 = weighted RSS / df_resid``.

    ``df_resid`` counts positive-weight rows minus columns.
    """
    X, y, w = _check_inputs(X, y, w)
    keep = w > 0
    if not keep.all():
        X, y, w = X[keep], y[keep], w[keep]
    n_used = int(keep.sum())
    df_resid = n_used - X.shape[1]
    if df_resid < 1:
        raise DegenerateError(
            f"need more positive-weight rows ({n_used}) than columns ({X.shape[1]})"
        )
    xtwx = (X.T * w) @ X
    vals, vecs = _sym_eig(xtwx)
    beta = _solve(vals, vecs, X.T @ (w * y))
    resid = y - X @ beta
    sigma = float(np.sqrt(np.sum(w * resid**2) / df_resid))
    return LinearGaussianFit(
        beta=beta,
        sigma=sigma,
        xtx_inverse=_inverse(vals, vecs),
        n_used=n_used,
        df_resid=df_resid,
    )
