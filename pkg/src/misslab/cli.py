"""``misslab`` command line: ``simulate``, ``fit`` and ``replica``.

Any failure is reported as one JSON object on a single stderr line and a
nonzero exit status.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

import numpy as np
from scipy.stats import norm

from . import __version__, _rng
from .config import FIT_METHODS, RunConfig, parse_config
from .data import infer_schema, load_csv, write_csv
from .errors import ConfigError, MisslabError
from .estimators import ModelSpec, bootstrap_se
from .estimators.dispatch import run_method
from .model_core import logistic_prob
from .report import FitReport, FitRow, ReportBundle, emit_fit_report, emit_report
from .simlab import run_monte_carlo, replica_table

log = logging.getLogger("misslab")


def cmd_simulate(cfg: RunConfig, *, write: bool = True) -> ReportBundle:
    """Monte Carlo run for every requested (scenario, n) pair."""
    start = time.perf_counter()
    bundle = ReportBundle()
    for scenario in cfg.scenarios:
        for n in cfg.ns:
            log.info("simulating %s n=%d M=%d", scenario.id, n, cfg.M)
            bundle.tables[(scenario.id, n)] = run_monte_carlo(
                cfg.gen.with_n(n), scenario, cfg.methods, cfg.M, cfg.base_seed,
                cfg.parallelism, ml_bootstrap=cfg.ml_bootstrap, cycles=cfg.cycles)
    bundle.meta = {
        "config": cfg.to_dict(),
        "base_seed": cfg.base_seed,
        "version": __version__,
        "wall_time_s": round(time.perf_counter() - start, 3),
        "missing_rate": {f"{sid}/n{n}": rep.missing_rate for (sid, n), rep in bundle.tables.items()},
    }
    if write and cfg.out:
        emit_report(bundle, cfg.out)
    return bundle


def _accuracy(table, spec: ModelSpec, beta) -> float:
    X, y = spec.design(table, table.complete_rows(spec.variables))
    return float(np.mean((logistic_prob(beta, X) > 0.5) == (y == 1)))


def _fit_one(method: str, table, spec: ModelSpec, cfg: RunConfig):
    if method == "CC":
        return run_method("cc", table, spec)
    if method == "IPW":
        return run_method("ipw", table, spec)
    if method.startswith("MI"):
        m = int(method[2:])
        return run_method("mi", table, spec, m=m, cycles=cfg.cycles,
                          seed=_rng.child(cfg.base_seed, _rng.MICE, m))
    est = run_method("ml", table, spec)
    boot = bootstrap_se(table, spec, "ml", cfg.bootstrap, _rng.child(cfg.base_seed, _rng.BOOT))
    return type(est)(est.beta, boot.se, est.n_used, est.detail)


def fit_table(table, cfg: RunConfig) -> FitReport:
    """Run every requested method on one dataset."""
    spec = ModelSpec(cfg.response, tuple(cfg.predictors))
    spec.validate(table)
    table = table.select(spec.variables)
    coef_names = tuple(spec.coef_names)
    rows, accuracy = [], {}
    for method in cfg.methods:
        try:
            est = _fit_one(method, table, spec, cfg)
        except MisslabError as exc:
            exc.method = method
            raise
        beta, se = np.asarray(est.beta), np.asarray(est.se)
        z = beta / se
        p = 2.0 * norm.sf(np.abs(z))
        for j, name in enumerate(coef_names):
            rows.append(FitRow(method, name, float(beta[j]), float(se[j]), float(z[j]),
                               float(p[j]), int(est.n_used)))
        accuracy[method] = _accuracy(table, spec, beta)
    return FitReport(rows, accuracy, tuple(cfg.methods), coef_names)


def cmd_fit(cfg: RunConfig, *, write: bool = True) -> FitReport:
    start = time.perf_counter()
    schema = cfg.schema or infer_schema(cfg.data)
    table = load_csv(cfg.data, schema)
    rep = fit_table(table, cfg)
    rep.meta = {"config": cfg.to_dict(), "base_seed": cfg.base_seed, "version": __version__,
                "wall_time_s": round(time.perf_counter() - start, 3), "n_rows": table.n}
    if write and cfg.out:
        emit_fit_report(rep, cfg.out)
    return rep


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, "argv")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="misslab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"misslab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte Carlo comparison of the estimators")
    s.add_argument("--config", help="JSON config (a previous run's metadata.json also works)")
    s.add_argument("--scenario", help="S1..S4, comma-separated, or a,b for a custom rate pair")
    s.add_argument("--n", help="sample size(s), comma-separated")
    s.add_argument("--M", type=int, help="trials per (scenario, n)")
    s.add_argument("--seed", type=int)
    s.add_argument("--methods", help="comma-separated subset of C,CC,IPW1,IPW2,MI5,MI20,ML")
    s.add_argument("--jobs", type=int, help="worker processes")
    s.add_argument("--ml-bootstrap", type=int, dest="ml_bootstrap",
                   help="bootstrap resamples per trial for ML standard errors")
    s.add_argument("--out", help="output directory")

    f = sub.add_parser("fit", help="fit every method to one CSV dataset")
    f.add_argument("--config")
    f.add_argument("--data", help="CSV file; the token NA marks a missing cell")
    f.add_argument("--response")
    f.add_argument("--predictors", help="comma-separated")
    f.add_argument("--methods", help=f"comma-separated subset of {','.join(FIT_METHODS)}")
    f.add_argument("--bootstrap", type=int, help="resamples for the ML standard errors")
    f.add_argument("--seed", type=int)
    f.add_argument("--out")

    r = sub.add_parser("replica", help="write a synthetic case-study dataset")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--n", type=int, default=230)
    r.add_argument("--out", required=True, help="CSV path")
    return p


def _scenario_flag(value):
    if value is None:
        return None
    parts = [v.strip() for v in value.split(",")]
    try:
        a, b = (float(v) for v in parts)
    except ValueError:
        return parts
    return {"a": a, "b": b}


def _error_line(exc: BaseException) -> str:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("key", "row", "column", "method"):
        val = getattr(exc, attr, None)
        if val is not None:
            doc[attr] = val
    return json.dumps(doc, sort_keys=True)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        if args.command == "replica":
            write_csv(replica_table(args.seed, args.n), args.out)
            return 0
        if args.command == "simulate":
            flags = {"scenario": _scenario_flag(args.scenario), "n": args.n, "M": args.M,
                     "seed": args.seed, "methods": args.methods, "jobs": args.jobs,
                     "ml_bootstrap": args.ml_bootstrap, "out": args.out}
            cfg = parse_config(args.config, flags, mode="simulate")
            if not cfg.out:
                raise ConfigError("simulate requires --out", "out")
            cmd_simulate(cfg)
        else:
            flags = {"data": args.data, "response": args.response, "predictors": args.predictors,
                     "methods": args.methods, "bootstrap": args.bootstrap, "seed": args.seed,
                     "out": args.out}
            cfg = parse_config(args.config, flags, mode="fit")
            if not cfg.out:
                raise ConfigError("fit requires --out", "out")
            cmd_fit(cfg)
        return 0
    except (MisslabError, OSError, ValueError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
