from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import BINARY, Table
from ..errors import SchemaError

INTERCEPT = "(Intercept)"


@dataclass(frozen=True)
class ModelSpec:
    """Logistic analysis model: ``response ~ 1 + predictors``."""

    response: str
    predictors: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if self.response in self.predictors:
            raise ValueError("response cannot also be a predictor")
        if len(set(self.predictors)) != len(self.predictors):
            raise ValueError("duplicate predictor names")

    @property
    def variables(self) -> tuple[str, ...]:
        return (self.response, *self.predictors)

    @property
    def coef_names(self) -> tuple[str, ...]:
        return (INTERCEPT, *self.predictors)

    def validate(self, table: Table) -> None:
        missing = [v for v in self.variables if v not in table.names]
        if missing:
            raise SchemaError(f"columns not in table: {missing}")
        if table.kind(self.response) != BINARY:
            raise SchemaError(f"response {self.response!r} must be a binary column")

    def design(self, table: Table, rows=None) -> tuple[np.ndarray, np.ndarray]:
        """Intercept-first design matrix and response vector."""
        vals = table.values if rows is None else table.values[rows]
        X = np.column_stack([np.ones(len(vals))]
                            + [vals[:, table.index(p)] for p in self.predictors])
        return X, vals[:, table.index(self.response)]
