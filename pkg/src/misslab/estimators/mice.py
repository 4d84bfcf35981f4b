"""Multiple imputation by chained equations and Rubin's pooling rules.

Continuous columns are imputed with Bayesian linear regression ("norm") and
binary columns with a logistic model whose coefficients are drawn from
their large-sample normal posterior ("logreg").
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import _rng
from ..data import BINARY, Table
from ..errors import DimensionError, FitError, ImputationModelError
from ..model_core import fit_linear_gaussian, fit_logistic
from .spec import ModelSpec

DEFAULT_CYCLES = 10
FALLBACK_RIDGE = 1e-4


@dataclass(frozen=True)
class ImputationSet:
    """``m`` completed copies of a table.

    ``n_fallbacks`` counts logistic steps that needed the ridge refit.
    """

    m: int
    tables: tuple[Table, ...]
    cycles: int
    seed: dict
    n_fallbacks: int = 0


@dataclass(frozen=True)
class PooledFit:
    beta_bar: np.ndarray
    W: np.ndarray
    B: np.ndarray
    T: np.ndarray
    df: np.ndarray
    m: int

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(self.T)


def visit_order(table: Table, columns: Sequence[str]) -> list[str]:
    """Incomplete columns by ascending missing count, ties in ``columns`` order."""
    counts = {c: int(np.isnan(table.column(c)).sum()) for c in columns}
    todo = [c for c in columns if counts[c] > 0]
    return sorted(todo, key=lambda c: (counts[c], columns.index(c)))


def _draw_norm(X_obs, y_obs, X_mis, rng):
    fit = fit_linear_gaussian(X_obs, y_obs)
    df = fit.df_resid
    sigma_star = np.sqrt(fit.sigma**2 * df / rng.chisquare(df))
    chol = np.linalg.cholesky(fit.xtx_inverse)
    beta_star = fit.beta + sigma_star * (chol @ rng.standard_normal(len(fit.beta)))
    return X_mis @ beta_star + sigma_star * rng.standard_normal(len(X_mis))


def _draw_logreg(X_obs, y_obs, X_mis, rng, beta0):
    fallback = False
    try:
        fit = fit_logistic(X_obs, y_obs, beta0=beta0)
        if not fit.converged:
            raise FitError("logistic imputation model did not converge")
    except FitError:
        fallback = True
        try:
            fit = fit_logistic(X_obs, y_obs, ridge=FALLBACK_RIDGE)
        except FitError as exc:
            raise ImputationModelError(f"logreg step failed after ridge fallback: {exc}") from exc
    chol = np.linalg.cholesky(fit.covariance)
    beta_star = fit.beta + chol @ rng.standard_normal(len(fit.beta))
    eta = X_mis @ beta_star
    p = 1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700)))
    return (rng.random(len(X_mis)) < p).astype(float), fit.beta, fallback


def _impute_once(values, kinds, cols, order, cycles, rng):
    values = values.copy()
    miss = {c: np.isnan(values[:, c]) for c in order}
    for c in order:
        observed = values[~miss[c], c]
        values[miss[c], c] = rng.choice(observed, size=int(miss[c].sum()))
    warm = {}
    n_fallbacks = 0
    ones = np.ones((len(values), 1))
    for _ in range(cycles):
        for c in order:
            others = [j for j in cols if j != c]
            X = np.hstack([ones, values[:, others]])
            obs, mis = ~miss[c], miss[c]
            if kinds[c] == BINARY:
                draw, warm[c], fb = _draw_logreg(X[obs], values[obs, c], X[mis], rng, warm.get(c))
                n_fallbacks += fb
            else:
                try:
                    draw = _draw_norm(X[obs], values[obs, c], X[mis], rng)
                except FitError as exc:
                    raise ImputationModelError(f"norm step failed: {exc}") from exc
            values[mis, c] = draw
    return values, n_fallbacks


def mice_impute(table: Table, m: int, cycles: int = DEFAULT_CYCLES, seed=None, *,
                spec: ModelSpec | None = None) -> ImputationSet:
    """Create ``m`` completed tables by chained equations.

    Parameters
    ----------
    table : Table
    m : int
        Number of imputed copies.
    cycles : int
        Full passes over the incomplete columns per copy.
    seed : int or SeedSequence
        Copy ``k`` uses the substream labeled ``k``.
    spec : ModelSpec, optional
        Restricts the imputation models to the analysis variables and breaks
        visit-order ties as predictors first, response last.  Without it every
        column of the table takes part, in table order.
    """
    if m < 1:
        raise ValueError("m must be positive")
    names = list(spec.predictors) + [spec.response] if spec else table.names
    order_names = visit_order(table, names)
    for c in order_names:
        if np.isnan(table.column(c)).all():
            raise ImputationModelError(f"column {c!r} has no observed values")
    cols = [table.index(c) for c in names]
    order = [table.index(c) for c in order_names]
    kinds = {table.index(c): table.kind(c) for c in names}

    tables, fallbacks = [], 0
    for k in range(m):
        if not order:
            tables.append(table)
            continue
        vals, fb = _impute_once(table.values, kinds, cols, order, cycles, _rng.rng(seed, k))
        fallbacks += fb
        tables.append(table.replace_values(vals))
    return ImputationSet(m, tuple(tables), cycles, _rng.describe(seed), fallbacks)


def rubin_pool(fits) -> PooledFit:
    """Pool per-imputation fits (anything with ``beta`` and ``covariance``).

    ``df`` is ``inf`` for coefficients with zero between-imputation variance.
    """
    fits = list(fits)
    m = len(fits)
    if m < 2:
        raise ValueError("pooling needs at least two fits")
    dims = {len(f.beta) for f in fits}
    if len(dims) != 1:
        raise DimensionError(f"fits have differing coefficient dimensions {sorted(dims)}")
    est = np.array([f.beta for f in fits])
    var = np.array([np.diag(f.covariance) for f in fits])
    beta_bar = est.mean(axis=0)
    W = var.mean(axis=0)
    B = est.var(axis=0, ddof=1)
    inflate = (1.0 + 1.0 / m) * B
    T = W + inflate
    with np.errstate(divide="ignore"):
        df = np.where(B > 0, (m - 1) * (1.0 + W / np.where(B > 0, inflate, 1.0)) ** 2, np.inf)
    return PooledFit(beta_bar, W, B, T, df, m)


def fit_mi(table: Table, spec: ModelSpec, m: int, cycles: int = DEFAULT_CYCLES,
           seed=None) -> tuple[PooledFit, ImputationSet]:
    """Impute, fit the analysis model on each copy, and pool."""
    from .weighting import fit_cc

    imps = mice_impute(table, m, cycles, seed, spec=spec)
    fits = [fit_cc(t, spec) for t in imps.tables]
    if m == 1:
        f = fits[0]
        d = np.diag(f.covariance)
        zero = np.zeros_like(d)
        return PooledFit(f.beta, d, zero, d, np.full_like(d, np.inf), 1), imps
    return rubin_pool(fits), imps
