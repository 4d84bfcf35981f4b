from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import _rng
from ..data import Table
from ..errors import BootstrapFailureError, MisslabError
from .dispatch import run_method
from .spec import ModelSpec

DEFAULT_B = 200
MIN_B = 50
MIN_SUCCESS_RATE = 0.9


@dataclass(frozen=True)
class BootstrapResult:
    se: np.ndarray
    n_success: int
    n_failed: int
    estimates: np.ndarray


def bootstrap_se(table: Table, spec: ModelSpec, method: str | Callable[[Table], np.ndarray],
                 B: int = DEFAULT_B, seed=None, **method_kw) -> BootstrapResult:
    """Nonparametric bootstrap standard errors.

    Each resample draws ``n`` rows with replacement from its own substream and
    refits ``method`` (an estimator kind, or any callable mapping a table to a
    coefficient vector).  Failed refits are counted and left out of the SD.

    Raises
    ------
    BootstrapFailureError
        Fewer than 90% of the refits succeeded.
    """
    if B < MIN_B:
        raise ValueError(f"bootstrap needs B >= {MIN_B}, got {B}")
    if callable(method):
        estimator = method
    else:
        def estimator(t, b):
            return run_method(method, t, spec, seed=_rng.child(seed, b, 1), **method_kw).beta

    estimates, failed = [], 0
    for b in range(B):
        idx = _rng.rng(seed, b, 0).integers(0, table.n, size=table.n)
        sample = table.take(idx)
        try:
            beta = estimator(sample) if callable(method) else estimator(sample, b)
        except (MisslabError, np.linalg.LinAlgError):
            failed += 1
            continue
        estimates.append(np.asarray(beta, dtype=float))
    n_ok = len(estimates)
    if n_ok < MIN_SUCCESS_RATE * B:
        raise BootstrapFailureError(
            f"only {n_ok} of {B} bootstrap refits succeeded", n_ok, B)
    est = np.array(estimates)
    return BootstrapResult(est.std(axis=0, ddof=1), n_ok, failed, est)
