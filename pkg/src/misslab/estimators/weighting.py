"""Complete-case and inverse-probability-weighted logistic fits."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..data import MissMask, Table
from ..errors import InsufficientDataError, NonConvergenceError
from ..model_core import GlmFit, fit_logistic, logistic_prob
from .spec import ModelSpec

log = logging.getLogger(__name__)

PROPENSITY_FLOOR = 0.01


@dataclass(frozen=True)
class PropensityFit:
    """Per-row probability of being fully observed.

    ``n_floored`` counts rows whose probability was raised to the floor.
    """

    p: np.ndarray
    source: str
    glm: GlmFit | None = None
    n_floored: int = 0

    @classmethod
    def unit(cls, n: int) -> "PropensityFit":
        return cls(np.ones(n), "unit")


def _floored(p, floor):
    low = p < floor
    if low.any():
        log.info("propensity floor %.3g binds on %d rows", floor, int(low.sum()))
    return np.maximum(p, floor), int(low.sum())


def _complete_fit(table: Table, spec: ModelSpec, weights) -> GlmFit:
    spec.validate(table)
    rows = table.complete_rows(spec.variables)
    n_rows = int(rows.sum())
    if n_rows < len(spec.predictors) + 2:
        raise InsufficientDataError(
            f"only {n_rows} complete rows for {len(spec.predictors)} predictors")
    X, y = spec.design(table, rows)
    w = None if weights is None else np.asarray(weights, dtype=float)[rows]
    fit = fit_logistic(X, y, w)
    if not fit.converged:
        raise NonConvergenceError(
            f"IRLS did not converge in {fit.iterations} iterations", fit.trace)
    return fit


def fit_cc(table: Table, spec: ModelSpec) -> GlmFit:
    """Logistic fit on the rows with every analysis variable observed."""
    return _complete_fit(table, spec, None)


def fit_ipw(table: Table, spec: ModelSpec, prop: PropensityFit) -> GlmFit:
    """Complete-row fit weighted by ``1 / p_i``.

    The reported covariance is the plain weighted-GLM one, which treats the
    weights as fixed.
    """
    if len(prop.p) != table.n:
        raise ValueError("propensity length does not match the table")
    return _complete_fit(table, spec, 1.0 / prop.p)


def fit_propensity(table: Table, mask: MissMask, drivers: Sequence[str],
                   *, floor: float = PROPENSITY_FLOOR) -> PropensityFit:
    """Logistic regression of the blockwise indicator R on the driver columns."""
    drivers = list(drivers)
    cols = [table.column(d) for d in drivers]
    if any(np.isnan(c).any() for c in cols):
        raise ValueError("propensity drivers must be fully observed")
    X = np.column_stack([np.ones(table.n), *cols])
    r = mask.row_observed.astype(float)
    fit = fit_logistic(X, r)
    if not fit.converged:
        raise NonConvergenceError("propensity fit did not converge", fit.trace)
    p, n_floored = _floored(logistic_prob(fit.beta, X), floor)
    return PropensityFit(p, "estimated", fit, n_floored)


def theoretical_propensity(table: Table, rate_fn, driver: str,
                           *, floor: float = PROPENSITY_FLOOR) -> PropensityFit:
    """Propensity ``1 - rate_fn(driver)`` from a known missingness rate."""
    p = 1.0 - np.asarray(rate_fn(table.column(driver)), dtype=float)
    p, n_floored = _floored(p, floor)
    return PropensityFit(p, "theoretical", None, n_floored)
