import numpy as np
import pytest

from misslab.data import BINARY, CONTINUOUS, Table
from misslab.simlab import GenConfig, gen_full


def make_table(y, z, z1, z2):
    kinds = {"Y": BINARY, "Z": BINARY, "Z1": BINARY, "Z2": CONTINUOUS}
    return Table.from_columns({"Y": y, "Z": z, "Z1": z1, "Z2": z2}, kinds)


def synthetic_logit(n, seed, beta=(-0.5, 1.0, -0.7)):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal(n), rng.random(n) < 0.4])
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ np.asarray(beta)))).astype(float)
    return X, y


GENTLE = (-0.5, 0.5, 1.0, -0.03)


def general_missing(n, seed, rates=(0.15, 0.15, 0.15), beta=GENTLE):
    """Independent MCAR deletion in Y, Z1 and Z2 (general pattern)."""
    rng = np.random.default_rng([seed, 1])  # must not share gen_full's stream
    full = gen_full(GenConfig(n=n, beta_true=beta), seed)
    vals = full.values.copy()
    for col, rate in zip((0, 2, 3), rates):
        vals[rng.random(n) < rate, col] = np.nan
    return full.replace_values(vals)


# seeds whose 12-row draws are neither separated nor singular
ENUM_SEEDS = (0, 1, 2, 5, 6, 9, 10, 17, 21, 27, 28)


def enum_instance(seed):
    rng = np.random.default_rng(seed)
    n = 12
    z = (rng.random(n) < 0.5).astype(float)
    z2 = rng.standard_normal(n)
    z1 = (rng.random(n) < 0.5).astype(float)
    y = (rng.random(n) < 0.5).astype(float)
    z1[rng.choice(n, 3, replace=False)] = np.nan
    return y, z, z1, z2


@pytest.fixture
def tiny_table():
    return make_table([1, 0, 1, 0, 1, 1, 0, 0],
                      [1, 1, 0, 0, 1, 0, 1, 0],
                      [1, 0, 1, 0, 0, 1, 1, 0],
                      [20.0, 31.5, 27.2, 35.1, 28.8, 22.4, 30.0, 33.3])


# one line per acceptance criterion, shown even when output is captured
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
