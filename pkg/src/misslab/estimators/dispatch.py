"""Uniform entry point: run one estimator on a table, get beta and SEs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..data import MissMask, Table
from ..errors import DegenerateError
from .em import QuadConfig, fit_ml_em
from .mice import DEFAULT_CYCLES, fit_mi
from .spec import ModelSpec
from .weighting import PropensityFit, fit_cc, fit_ipw, fit_propensity

log = logging.getLogger(__name__)

KINDS = ("cc", "ipw", "mi", "ml")


@dataclass(frozen=True)
class Estimate:
    """Coefficients with standard errors (``NaN`` when the method has none)."""

    beta: np.ndarray
    se: np.ndarray
    n_used: int
    detail: Any = None


def always_observed(table: Table, spec: ModelSpec) -> list[str]:
    return [p for p in spec.predictors if not np.isnan(table.column(p)).any()]


def estimated_propensity(table: Table, drivers) -> PropensityFit:
    """Propensity from the data, falling back to unit weights if degenerate."""
    try:
        return fit_propensity(table, MissMask.of(table), drivers)
    except DegenerateError:
        log.warning("propensity fit is degenerate (no incomplete rows); using unit weights")
        return PropensityFit.unit(table.n)


def run_method(kind: str, table: Table, spec: ModelSpec, *, seed=None,
               propensity: PropensityFit | None = None, drivers=None,
               m: int = 5, cycles: int = DEFAULT_CYCLES,
               quad: QuadConfig | None = None) -> Estimate:
    """Fit ``kind`` (one of ``cc``, ``ipw``, ``mi``, ``ml``).

    For ``ipw`` without an explicit ``propensity`` the propensity is estimated
    from ``drivers`` (default: the always-observed predictors).
    """
    if kind == "cc":
        fit = fit_cc(table, spec)
        return Estimate(fit.beta, fit.se, fit.n_used, fit)
    if kind == "ipw":
        if propensity is None:
            drivers = always_observed(table, spec) if drivers is None else drivers
            propensity = estimated_propensity(table, drivers)
        fit = fit_ipw(table, spec, propensity)
        return Estimate(fit.beta, fit.se, fit.n_used, fit)
    if kind == "mi":
        pooled, _ = fit_mi(table, spec, m, cycles, seed)
        return Estimate(pooled.beta_bar, pooled.se, table.n, pooled)
    if kind == "ml":
        fit = fit_ml_em(table, spec, quad)
        return Estimate(fit.beta, np.full(len(fit.beta), np.nan), fit.n_used, fit)
    raise ValueError(f"unknown estimator kind {kind!r}; expected one of {KINDS}")
