"""Missing-data estimators for the logistic analysis model."""

from .bootstrap import bootstrap_se
from .em import EmFit, QuadConfig, e_step, fit_ml_em, observed_loglik
from .mice import ImputationSet, PooledFit, fit_mi, mice_impute, rubin_pool
from .spec import INTERCEPT, ModelSpec
from .weighting import (PROPENSITY_FLOOR, PropensityFit, fit_cc, fit_ipw, fit_propensity,
                        theoretical_propensity)

__all__ = [
    "EmFit", "ImputationSet", "INTERCEPT", "ModelSpec", "PooledFit", "PropensityFit",
    "PROPENSITY_FLOOR", "QuadConfig", "bootstrap_se", "e_step", "fit_cc", "fit_ipw",
    "fit_mi", "fit_ml_em", "fit_propensity", "mice_impute", "observed_loglik",
    "rubin_pool", "theoretical_propensity",
]
