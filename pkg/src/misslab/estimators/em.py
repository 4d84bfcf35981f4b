"""Maximum likelihood for the factored model by EM with numerical integration.

The joint density of the analysis variables is written as a chain of
univariate conditionals: each incomplete predictor given the always-observed
predictors and the incomplete predictors before it, then the response given
every predictor.  Always-observed predictors are conditioned on and need no
model.  Binary variables get logistic conditionals, continuous ones
Gaussian-linear conditionals.

E-step: every incomplete row is expanded over its missing variables, with
binary values enumerated and continuous values placed on Gauss-Hermite nodes
centred and scaled by the variable's current conditional mean and SD.  The
expansion is kept as a broadcast tensor, one axis per missing variable, so
the M-step can sum out the axes a conditional does not depend on before
refitting it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp

from ..data import BINARY, Table
from ..errors import DegenerateError, InsufficientDataError, NonConvergenceError
from ..model_core import fit_linear_gaussian, fit_logistic
from .spec import ModelSpec

EM_TOL = 1e-6
EM_MAX_ITER = 500
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class QuadConfig:
    n_nodes: int = 21

    def rule(self):
        x, w = hermgauss(self.n_nodes)
        return np.sqrt(2.0) * x, np.log(w / np.sqrt(np.pi))


@dataclass
class Conditional:
    """One factor of the chain: ``var | parents``."""

    var: str
    kind: str
    parents: tuple[str, ...]
    beta: np.ndarray
    sigma: float | None = None


@dataclass(frozen=True)
class EmFit:
    beta: np.ndarray
    nuisance: dict
    loglik_trace: tuple
    converged: bool
    n_used: int = 0
    model: tuple = field(default=(), repr=False)

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]

    @property
    def iterations(self) -> int:
        return len(self.loglik_trace) - 1


@dataclass(frozen=True)
class ExpandedRow:
    """Pseudo-rows of one source row; ``values`` columns follow ``spec.variables``."""

    row: int
    values: np.ndarray
    weights: np.ndarray


def build_chain(table: Table, spec: ModelSpec) -> list[Conditional]:
    """Conditionals of the factored model, in sampling order (no parameters yet)."""
    spec.validate(table)
    incomplete = [p for p in spec.predictors if np.isnan(table.column(p)).any()]
    always = [p for p in spec.predictors if p not in incomplete]
    chain = []
    for i, v in enumerate(incomplete):
        chain.append(Conditional(v, table.kind(v), tuple(always + incomplete[:i]), None))
    chain.append(Conditional(spec.response, BINARY, tuple(spec.predictors), None))
    return chain


class _Group:
    """Rows sharing one missing pattern, expanded as a broadcast tensor."""

    def __init__(self, rows, vals, missing, chain):
        self.rows = rows
        self.obs = vals          # (k, n_vars) raw values for these rows
        self.missing = missing   # set of variable names
        self.axis = {}
        for c in chain:
            if c.var in missing:
                self.axis[c.var] = 1 + len(self.axis)
        self.ndim = 1 + len(self.axis)


class _Engine:
    def __init__(self, table: Table, spec: ModelSpec, quad: QuadConfig):
        self.spec = spec
        self.chain = build_chain(table, spec)
        self.names = list(spec.variables)
        self.col = {v: table.index(v) for v in self.names}
        self.nodes, self.log_w = quad.rule()
        vals = table.values[:, [self.col[v] for v in self.names]]
        miss = np.isnan(vals)
        keys = [tuple(r) for r in miss]
        patterns = sorted(set(keys))
        self.groups = []
        for pat in patterns:
            rows = np.flatnonzero([k == pat for k in keys])
            missing = {v for v, m in zip(self.names, pat) if m}
            self.groups.append(_Group(rows, vals[rows], missing, self.chain))
        self.n = table.n
        self.vals = vals

    # -- E-step -----------------------------------------------------------
    def expand(self, g: _Group):
        """Return (values dict, log joint weight tensor) for a group."""
        k = len(g.rows)
        shape1 = (k,) + (1,) * (g.ndim - 1)
        values = {}
        for j, v in enumerate(self.names):
            if v not in g.missing:
                values[v] = g.obs[:, j].reshape(shape1)
        logw = np.zeros(shape1)
        for c in self.chain:
            eta = c.beta[0] + sum(b * values[p] for b, p in zip(c.beta[1:], c.parents))
            eta = np.broadcast_to(eta, np.broadcast_shapes(np.shape(eta), shape1))
            if c.var in g.missing:
                ax = g.axis[c.var]
                if c.kind == BINARY:
                    val = np.array([0.0, 1.0]).reshape((1,) * ax + (2,) + (1,) * (g.ndim - ax - 1))
                    logw = logw + (val * eta - np.logaddexp(0.0, eta))
                else:
                    sh = (1,) * ax + (len(self.nodes),) + (1,) * (g.ndim - ax - 1)
                    val = eta + c.sigma * self.nodes.reshape(sh)
                    logw = logw + self.log_w.reshape(sh)
                values[c.var] = val
            else:
                y = values[c.var]
                if c.kind == BINARY:
                    logw = logw + (y * eta - np.logaddexp(0.0, eta))
                else:
                    z = (y - eta) / c.sigma
                    logw = logw + (-0.5 * z * z - np.log(c.sigma) - 0.5 * _LOG_2PI)
        full = np.broadcast_shapes(logw.shape, *(np.shape(v) for v in values.values()))
        logw = np.broadcast_to(logw, full)
        axes = tuple(range(1, g.ndim))
        row_ll = logsumexp(logw, axis=axes) if axes else logw.reshape(k)
        post = np.exp(logw - row_ll.reshape(shape1))
        return values, post, row_ll

    def e_step(self):
        ll = 0.0
        out = []
        for g in self.groups:
            values, post, row_ll = self.expand(g)
            ll += float(row_ll.sum())
            out.append((g, values, post))
        return ll, out

    # -- M-step -----------------------------------------------------------
    def _rows_for(self, c: Conditional, expanded):
        Xs, ys, ws = [], [], []
        for g, values, post in expanded:
            involved = [c.var, *c.parents]
            keep_axes = set()
            for v in involved:
                sh = np.shape(values[v])
                keep_axes.update(a for a in range(1, len(sh)) if sh[a] > 1)
            own = g.axis.get(c.var)
            collapse_own = own is not None and c.kind == BINARY
            drop = tuple(a for a in range(1, g.ndim) if a not in keep_axes)
            w = post.sum(axis=drop, keepdims=True) if drop else post
            if collapse_own:
                y = np.take(w, [1], axis=own)
                w = w.sum(axis=own, keepdims=True)
                with np.errstate(invalid="ignore", divide="ignore"):
                    y = np.where(w > 0, y / np.where(w > 0, w, 1.0), 0.0)
            else:
                y = values[c.var]
            shape = w.shape
            cols = [np.broadcast_to(values[p], shape).ravel() for p in c.parents]
            X = np.column_stack([np.ones(w.size), *cols]) if cols else np.ones((w.size, 1))
            Xs.append(X)
            ys.append(np.broadcast_to(y, shape).ravel())
            ws.append(np.asarray(w).ravel())
        return np.vstack(Xs), np.concatenate(ys), np.concatenate(ws)

    def m_step(self, expanded):
        for c in self.chain:
            X, y, w = self._rows_for(c, expanded)
            self._fit(c, X, y, w)

    @staticmethod
    def _fit(c: Conditional, X, y, w):
        if c.kind == BINARY:
            fit = fit_logistic(X, y, w, beta0=c.beta)
            if not fit.converged:
                raise NonConvergenceError(f"M-step fit for {c.var!r} did not converge", fit.trace)
            c.beta = fit.beta
        else:
            fit = fit_linear_gaussian(X, y, w)
            resid = y - X @ fit.beta
            c.beta = fit.beta
            c.sigma = float(np.sqrt(np.sum(w * resid**2) / np.sum(w)))
            if not c.sigma > 0:
                raise DegenerateError(f"conditional of {c.var!r} has zero variance")

    def initialize(self):
        """Available-case fits: rows where the variable and its parents are observed."""
        for c in self.chain:
            idx = [self.names.index(v) for v in (c.var, *c.parents)]
            rows = ~np.isnan(self.vals[:, idx]).any(axis=1)
            if rows.sum() < len(c.parents) + 2:
                raise InsufficientDataError(f"too few observed rows to start the {c.var!r} model")
            sub = self.vals[rows][:, idx]
            X = np.column_stack([np.ones(len(sub)), sub[:, 1:]])
            c.beta = None
            self._fit(c, X, sub[:, 0], np.ones(len(sub)))


def fit_ml_em(table: Table, spec: ModelSpec, quad: QuadConfig | None = None, *,
              tol: float = EM_TOL, max_iter: int = EM_MAX_ITER) -> EmFit:
    """Maximize the observed-data likelihood of the factored model by EM.

    Stops when the log-likelihood changes by less than ``tol`` between
    iterations.

    Raises
    ------
    NonConvergenceError
        After ``max_iter`` iterations; ``.trace`` holds the log-likelihoods.
    """
    eng = _Engine(table, spec, quad or QuadConfig())
    eng.initialize()
    ll, expanded = eng.e_step()
    trace = [ll]
    converged = False
    for _ in range(max_iter):
        eng.m_step(expanded)
        ll_new, expanded = eng.e_step()
        trace.append(ll_new)
        if abs(ll_new - ll) < tol:
            converged = True
            break
        ll = ll_new
    if not converged:
        raise NonConvergenceError(f"EM did not converge in {max_iter} iterations", trace)
    response = eng.chain[-1]
    nuisance = {c.var: c for c in eng.chain[:-1]}
    return EmFit(
        beta=response.beta.copy(),
        nuisance=nuisance,
        loglik_trace=tuple(trace),
        converged=True,
        n_used=table.n,
        model=tuple(eng.chain),
    )


def observed_loglik(table: Table, spec: ModelSpec, chain, quad: QuadConfig | None = None) -> float:
    """Observed-data log-likelihood of the factored model at ``chain``'s parameters."""
    eng = _Engine(table, spec, quad or QuadConfig())
    for c, given in zip(eng.chain, chain):
        c.beta, c.sigma = np.asarray(given.beta, dtype=float), given.sigma
    return eng.e_step()[0]


def e_step(table: Table, spec: ModelSpec, chain, quad: QuadConfig | None = None) -> list[ExpandedRow]:
    """Pseudo-row expansion of every incomplete row at the given parameters."""
    eng = _Engine(table, spec, quad or QuadConfig())
    for c, given in zip(eng.chain, chain):
        c.beta, c.sigma = np.asarray(given.beta, dtype=float), given.sigma
    out = []
    for g in eng.groups:
        if not g.missing:
            continue
        values, post, _ = eng.expand(g)
        shape = post.shape
        cols = np.stack([np.broadcast_to(values[v], shape) for v in eng.names], axis=-1)
        for i, r in enumerate(g.rows):
            out.append(ExpandedRow(int(r), cols[i].reshape(-1, len(eng.names)), post[i].ravel()))
    out.sort(key=lambda e: e.row)
    return out
