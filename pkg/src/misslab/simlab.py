"""Monte Carlo laboratory: data generation, missingness scenarios, trials, metrics.

The full-data design draws ``Z ~ Ber(p1)``, ``Z1 | Z ~ Ber(p2(Z))``,
``Z2 | Z, Z1 ~ N(mu, sigma)`` per cell and ``Y`` from the logistic model
with coefficients ``beta_true``.  Scenarios delete ``{Y, Z1, Z2}`` jointly
with probability ``a * Z + b * (1 - Z)``.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from . import _rng
from .data import BINARY, CONTINUOUS, Column, LinearRate, MechanismSpec, Table, inject_missing
from .errors import ConfigError, InsufficientTrialsError, MisslabError
from .estimators import ModelSpec, bootstrap_se
from .estimators.dispatch import estimated_propensity, run_method
from .estimators.mice import DEFAULT_CYCLES
from .estimators.weighting import theoretical_propensity

log = logging.getLogger(__name__)

METHODS = ("C", "CC", "IPW1", "IPW2", "MI5", "MI20", "ML")
COEF_NAMES = ("b0", "bz", "b1", "b2")
ANALYSIS = ModelSpec("Y", ("Z", "Z1", "Z2"))
TARGETS = ("Y", "Z1", "Z2")
DRIVER = "Z"
MIN_SUCCESS = 0.5

SCENARIOS = {
    "S1": (0.09, 0.09),
    "S2": (0.20, 0.20),
    "S3": (0.30, 0.10),
    "S4": (0.65, 0.05),
}


def _default_p2():
    return {0: 0.27, 1: 0.31}


def _default_normals():
    return {(0, 0): (31.0, 7.0), (0, 1): (25.0, 10.0), (1, 0): (33.0, 6.0), (1, 1): (28.0, 9.0)}


@dataclass(frozen=True)
class GenConfig:
    n: int = 230
    p1: float = 0.55
    p2: Mapping[int, float] = field(default_factory=_default_p2)
    normal_params: Mapping[tuple, tuple] = field(default_factory=_default_normals)
    beta_true: tuple = (-0.96, 0.87, 2.9, -0.086)

    def __post_init__(self):
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        if self.n < 1:
            raise ConfigError(f"n must be positive, got {self.n}", "n")
        if not 0 < self.p1 < 1:
            raise ConfigError(f"p1 must lie in (0, 1), got {self.p1}", "p1")
        for z in (0, 1):
            if not 0 < self.p2[z] < 1:
                raise ConfigError(f"p2({z}) must lie in (0, 1), got {self.p2[z]}", "p2")
            for z1 in (0, 1):
                mu, sd = self.normal_params[(z, z1)]
                if not sd > 0 or not np.isfinite(mu):
                    raise ConfigError(f"normal_params({z},{z1}) needs finite mu and sigma > 0",
                                      "normal_params")
        if len(self.beta_true) != 4:
            raise ConfigError("beta_true needs four coefficients (b0, bz, b1, b2)", "beta_true")

    def with_n(self, n: int) -> "GenConfig":
        return GenConfig(n, self.p1, dict(self.p2), dict(self.normal_params), self.beta_true)


@dataclass(frozen=True)
class ScenarioSpec:
    """Blockwise deletion with probability ``a * z + b * (1 - z)``."""

    id: str
    a: float
    b: float

    def __post_init__(self):
        for name, v in (("a", self.a), ("b", self.b)):
            if not 0 <= v <= 1:
                raise ConfigError(f"scenario rate {name}={v} outside [0, 1]", "scenario")

    @classmethod
    def named(cls, sid: str) -> "ScenarioSpec":
        try:
            return cls(sid, *SCENARIOS[sid])
        except KeyError:
            raise ConfigError(f"unknown scenario {sid!r}; expected one of {sorted(SCENARIOS)}",
                              "scenario") from None

    @property
    def rate(self) -> LinearRate:
        return LinearRate(self.a, self.b)

    def mechanism(self) -> MechanismSpec:
        return MechanismSpec.mar(DRIVER, self.rate)

    def marginal_rate(self, p1: float) -> float:
        return self.a * p1 + self.b * (1 - p1)


def gen_full(cfg: GenConfig, seed) -> Table:
    """Draw a complete (Y, Z, Z1, Z2) table."""
    rng = np.random.default_rng(_rng.seed_sequence(seed))
    n = cfg.n
    z = (rng.random(n) < cfg.p1).astype(float)
    z1 = (rng.random(n) < np.where(z == 1, cfg.p2[1], cfg.p2[0])).astype(float)
    mu = np.empty(n)
    sd = np.empty(n)
    for (zz, zz1), (m, s) in cfg.normal_params.items():
        cell = (z == zz) & (z1 == zz1)
        mu[cell], sd[cell] = m, s
    z2 = mu + sd * rng.standard_normal(n)
    b0, bz, b1, b2 = cfg.beta_true
    y = (rng.random(n) < expit(b0 + bz * z + b1 * z1 + b2 * z2)).astype(float)
    cols = [Column("Y", BINARY), Column("Z", BINARY), Column("Z1", BINARY), Column("Z2", CONTINUOUS)]
    return Table(cols, np.column_stack([y, z, z1, z2]))


# complete-case coefficients of the obesity case study; deletion slightly
# heavier for Z = 1 so the block is gender-driven at about 9% overall
CASE_STUDY_BETA = (-0.0825, -0.8759, 2.9606, -0.0861)
CASE_STUDY_RATES = (0.10, 0.08)


def replica_table(seed, n: int = 230) -> Table:
    """Synthetic stand-in for the case-study data, block {Y, Z1, Z2} deleted."""
    cfg = GenConfig(n=n, beta_true=CASE_STUDY_BETA)
    full = gen_full(cfg, _rng.child(seed, _rng.GEN))
    scenario = ScenarioSpec("replica", *CASE_STUDY_RATES)
    masked, _ = inject_missing(full, scenario.mechanism(), TARGETS, _rng.child(seed, _rng.INJECT))
    return masked


@dataclass(frozen=True)
class MethodResult:
    beta: np.ndarray | None
    se: np.ndarray | None
    status: str
    reason: str = ""
    n_used: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class TrialResult:
    trial: int
    results: dict
    n_missing: int


def _mi_size(method: str) -> int:
    return int(method[2:])


def check_methods(methods: Sequence[str]) -> None:
    from .errors import UnknownMethodError

    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UnknownMethodError(f"unknown methods {bad}; expected a subset of {list(METHODS)}",
                                 "methods")


def run_trial(cfg: GenConfig, scenario: ScenarioSpec, methods: Sequence[str], trial_index: int,
              base_seed, *, ml_bootstrap: int = 0, cycles: int = DEFAULT_CYCLES) -> TrialResult:
    """One Monte Carlo trial; method failures are recorded, never raised."""
    check_methods(methods)
    full = gen_full(cfg, _rng.child(base_seed, trial_index, _rng.GEN))
    masked, mask = inject_missing(full, scenario.mechanism(), TARGETS,
                                  _rng.child(base_seed, trial_index, _rng.INJECT))
    results = {}
    for method in methods:
        try:
            if method == "C":
                est = run_method("cc", full, ANALYSIS)
            elif method == "CC":
                est = run_method("cc", masked, ANALYSIS)
            elif method == "IPW1":
                prop = theoretical_propensity(masked, scenario.rate, DRIVER)
                est = run_method("ipw", masked, ANALYSIS, propensity=prop)
            elif method == "IPW2":
                est = run_method("ipw", masked, ANALYSIS,
                                 propensity=estimated_propensity(masked, [DRIVER]))
            elif method.startswith("MI"):
                m = _mi_size(method)
                est = run_method("mi", masked, ANALYSIS, m=m, cycles=cycles,
                                 seed=_rng.child(base_seed, trial_index, _rng.MICE, m))
            else:
                est = run_method("ml", masked, ANALYSIS)
                if ml_bootstrap:
                    boot = bootstrap_se(masked, ANALYSIS, "ml", ml_bootstrap,
                                        _rng.child(base_seed, trial_index, _rng.BOOT))
                    est = type(est)(est.beta, boot.se, est.n_used, est.detail)
            results[method] = MethodResult(np.asarray(est.beta), np.asarray(est.se), "ok",
                                           n_used=est.n_used)
        except (MisslabError, np.linalg.LinAlgError) as exc:
            results[method] = MethodResult(None, None, "failed", f"{type(exc).__name__}: {exc}")
    return TrialResult(trial_index, results, int((~mask.row_observed).sum()))


def compute_metrics(estimates, truth):
    """Bias, variance (divisor M) and MSE = bias^2 + var along axis 0."""
    est = np.asarray(estimates, dtype=float)
    if est.shape[0] < 2:
        raise ValueError("metrics need at least two estimates")
    mean = est.mean(axis=0)
    bias = mean - np.asarray(truth, dtype=float)
    var = np.mean((est - mean) ** 2, axis=0)
    return bias, var, bias**2 + var


@dataclass
class McReport:
    """Aggregated Monte Carlo results, one entry per method."""

    M: int
    n: int
    scenario: str
    methods: tuple
    beta_true: tuple
    bias: dict
    var: dict
    mse: dict
    n_fail: dict
    fail_reasons: dict
    se_ratio_mean: dict
    se_ratio_median: dict
    estimates: dict
    missing_rate: float
    seed: dict
    coef_names: tuple = COEF_NAMES


def _run_chunk(args):
    cfg, scenario, methods, indices, base_seed, ml_bootstrap, cycles = args
    return [run_trial(cfg, scenario, methods, i, base_seed, ml_bootstrap=ml_bootstrap,
                      cycles=cycles) for i in indices]


def run_trials(cfg, scenario, methods, M, base_seed, parallelism=1, *, ml_bootstrap=0,
               cycles=DEFAULT_CYCLES) -> list[TrialResult]:
    check_methods(methods)
    indices = list(range(M))
    if parallelism <= 1:
        return _run_chunk((cfg, scenario, tuple(methods), indices, base_seed, ml_bootstrap, cycles))
    n_chunks = min(M, 4 * parallelism)
    chunks = [indices[i::n_chunks] for i in range(n_chunks)]
    jobs = [(cfg, scenario, tuple(methods), c, base_seed, ml_bootstrap, cycles) for c in chunks]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        trials = [t for part in pool.map(_run_chunk, jobs) for t in part]
    return sorted(trials, key=lambda t: t.trial)


def summarize(trials: Sequence[TrialResult], cfg: GenConfig, scenario: ScenarioSpec,
              methods: Sequence[str], base_seed) -> McReport:
    """Aggregate trials (in trial-index order) into an :class:`McReport`."""
    trials = sorted(trials, key=lambda t: t.trial)
    M = len(trials)
    if M < 2:
        raise ValueError("Monte Carlo aggregation needs M >= 2")
    truth = np.array(cfg.beta_true)
    p = len(truth)
    out = {k: {} for k in ("bias", "var", "mse", "n_fail", "fail_reasons", "se_ratio_mean",
                           "se_ratio_median", "estimates")}
    short = []
    for method in methods:
        res = [t.results[method] for t in trials]
        est = np.full((M, p), np.nan)
        se = np.full((M, p), np.nan)
        for i, r in enumerate(res):
            if r.ok:
                est[i], se[i] = r.beta, r.se
        ok = ~np.isnan(est).any(axis=1)
        n_ok = int(ok.sum())
        out["n_fail"][method] = M - n_ok
        out["fail_reasons"][method] = dict(Counter(r.reason.split(":")[0] for r in res if not r.ok))
        out["estimates"][method] = est
        if n_ok < MIN_SUCCESS * M or n_ok < 2:
            short.append(f"{method} ({n_ok}/{M})")
            continue
        bias, var, mse = compute_metrics(est[ok], truth)
        out["bias"][method], out["var"][method], out["mse"][method] = bias, var, mse
        sd = est[ok].std(axis=0, ddof=1)
        s = se[ok]
        # no reported SE, or no Monte Carlo spread: the ratio is undefined
        if np.isnan(s).any() or np.any(sd == 0):
            out["se_ratio_mean"][method] = None
            out["se_ratio_median"][method] = None
        else:
            out["se_ratio_mean"][method] = s.mean(axis=0) / sd
            out["se_ratio_median"][method] = np.median(s, axis=0) / sd
    if short:
        raise InsufficientTrialsError(
            f"methods succeeded in fewer than half of the trials: {', '.join(short)}")
    n_missing = sum(t.n_missing for t in trials)
    return McReport(M=M, n=cfg.n, scenario=scenario.id, methods=tuple(methods),
                    beta_true=cfg.beta_true, missing_rate=n_missing / (M * cfg.n),
                    seed=_rng.describe(base_seed), **out)


def run_monte_carlo(cfg: GenConfig, scenario: ScenarioSpec, methods: Sequence[str], M: int,
                    base_seed, parallelism: int = 1, *, ml_bootstrap: int = 0,
                    cycles: int = DEFAULT_CYCLES) -> McReport:
    """Run ``M`` trials and aggregate; the result does not depend on ``parallelism``.

    ML standard errors exist only when ``ml_bootstrap`` (resamples per trial)
    is positive; otherwise ML is left out of the SE-accuracy ratios.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    trials = run_trials(cfg, scenario, methods, M, base_seed, parallelism,
                        ml_bootstrap=ml_bootstrap, cycles=cycles)
    return summarize(trials, cfg, scenario, methods, base_seed)
