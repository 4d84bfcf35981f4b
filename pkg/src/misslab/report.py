"""Delimited and Markdown output for simulation and single-dataset runs.

CSV numbers carry 6 significant digits; the Markdown summaries use 4
decimals.  Nothing written here may be NaN: a method that failed in some
trials shows up through its ``n_fail`` count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MisslabError
from .simlab import McReport

METRIC_HEADER = ("method", "coefficient", "bias", "var", "mse", "n_fail")
SE_HEADER = ("scenario", "n", "method", "coefficient", "mean_ratio", "median_ratio", "n_fail")
FIT_HEADER = ("method", "coefficient", "estimate", "se", "z", "p_value", "stars", "n_used")
STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, "."))

ML_NOTE = (
    "When the missing block is driven only by an always-observed predictor, the "
    "observed-data likelihood factorizes and the ML estimate of the analysis "
    "coefficients coincides with the complete-case fit. The ML rows therefore "
    "repeat the CC rows up to EM tolerance; ML variances smaller than CC's are "
    "not expected under this design and are not produced here."
)


class ReportIOError(MisslabError):
    """Writing a report file failed; the message names the path."""


def fmt6(x: float) -> str:
    """Six significant digits, trailing zeros kept (``-0.00406000``)."""
    x = float(x) + 0.0  # folds -0.0 into 0.0
    if not math.isfinite(x):
        raise ValueError(f"refusing to format non-finite value {x!r}")
    text = format(x, "#.6g")
    return text[:-1] if text.endswith(".") else text


def fmt4(x) -> str:
    if x is None or not math.isfinite(float(x)):
        return "n/a"
    return f"{float(x):.4f}"


def stars(p: float) -> str:
    for level, mark in STAR_LEVELS:
        if p < level:
            return mark
    return ""


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")


@dataclass
class ReportBundle:
    """Simulation tables keyed by ``(scenario id, n)`` plus run metadata."""

    tables: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def metric_rows(self, key):
        rep: McReport = self.tables[key]
        rows = []
        for method in rep.methods:
            for j, coef in enumerate(rep.coef_names):
                rows.append((method, coef, float(rep.bias[method][j]), float(rep.var[method][j]),
                             float(rep.mse[method][j]), int(rep.n_fail[method])))
        return rows

    def se_rows(self):
        rows = []
        for (sid, n), rep in self.tables.items():
            for method in rep.methods:
                mean = rep.se_ratio_mean.get(method)
                if mean is None:
                    continue
                med = rep.se_ratio_median[method]
                for j, coef in enumerate(rep.coef_names):
                    rows.append((sid, n, method, coef, float(mean[j]), float(med[j]),
                                 int(rep.n_fail[method])))
        return rows


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt6(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror}") from None


def _prepare(out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def metrics_filename(sid: str, n: int) -> str:
    return f"metrics_{slug(sid)}_n{n}.csv"


def summary_markdown(bundle: ReportBundle) -> str:
    lines = ["# Monte Carlo summary", ""]
    for (sid, n), rep in bundle.tables.items():
        lines += [f"## Scenario {sid}, n = {n}, M = {rep.M}", "",
                  f"Fraction of rows with the block missing: {rep.missing_rate:.4f}", "",
                  "| Method | Coef | Bias | Var | MSE | Failed |",
                  "|---|---|---:|---:|---:|---:|"]
        for method, coef, b, v, m, f in bundle.metric_rows((sid, n)):
            lines.append(f"| {method} | {coef} | {fmt4(b)} | {fmt4(v)} | {fmt4(m)} | {f} |")
        reasons = {k: v for k, v in rep.fail_reasons.items() if v}
        if reasons:
            lines += ["", "Failure reasons: " + "; ".join(
                f"{k}: " + ", ".join(f"{r} x{c}" for r, c in sorted(v.items()))
                for k, v in reasons.items())]
        lines.append("")
    se = bundle.se_rows()
    if se:
        lines += ["## Standard-error accuracy (reported SE / Monte Carlo SD)", "",
                  "| Scenario | n | Method | Coef | Mean ratio | Median ratio |",
                  "|---|---:|---|---|---:|---:|"]
        for sid, n, method, coef, mean, med, _ in se:
            lines.append(f"| {sid} | {n} | {method} | {coef} | {fmt4(mean)} | {fmt4(med)} |")
        lines.append("")
    if any("ML" in rep.methods for rep in bundle.tables.values()):
        lines += ["## Note on ML", "", ML_NOTE, ""]
    return "\n".join(lines)


def emit_report(bundle: ReportBundle, out_dir) -> list[Path]:
    """Write metric CSVs, the SE-accuracy CSV, ``summary.md`` and ``metadata.json``."""
    out = _prepare(out_dir)
    written = []
    for sid, n in bundle.tables:
        path = out / metrics_filename(sid, n)
        _write(path, _csv_text(METRIC_HEADER, bundle.metric_rows((sid, n))))
        written.append(path)
    path = out / "se_accuracy.csv"
    _write(path, _csv_text(SE_HEADER, bundle.se_rows()))
    written.append(path)
    path = out / "summary.md"
    _write(path, summary_markdown(bundle))
    written.append(path)
    path = out / "metadata.json"
    _write(path, json.dumps(bundle.meta, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def read_metrics(path) -> list[dict]:
    """Parse a metrics CSV back into dicts with float/int fields."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("bias", "var", "mse"):
            r[k] = float(r[k])
        r["n_fail"] = int(r["n_fail"])
    return rows


# -- single-dataset fits -------------------------------------------------------

@dataclass(frozen=True)
class FitRow:
    method: str
    coefficient: str
    estimate: float
    se: float
    z: float
    p_value: float
    n_used: int

    @property
    def stars(self) -> str:
        return stars(self.p_value)


@dataclass
class FitReport:
    rows: list
    accuracy: dict
    methods: tuple
    coef_names: tuple
    meta: dict = field(default_factory=dict)

    def row(self, method: str, coef: str) -> FitRow:
        for r in self.rows:
            if r.method == method and r.coefficient == coef:
                return r
        raise KeyError((method, coef))


def fit_markdown(rep: FitReport) -> str:
    head = "| Coefficient | " + " | ".join(rep.methods) + " |"
    lines = ["# Coefficients by method (SE in parentheses)", "", head,
             "|---|" + "---:|" * len(rep.methods)]
    for coef in rep.coef_names:
        cells = []
        for m in rep.methods:
            r = rep.row(m, coef)
            cells.append(f"{r.estimate:.4f}{r.stars} ({r.se:.4f})")
        lines.append(f"| {coef} | " + " | ".join(cells) + " |")
    lines.append("| Accuracy (cutoff 0.5) | "
                 + " | ".join(f"{rep.accuracy[m]:.4f}" for m in rep.methods) + " |")
    lines += ["", "Significance: `***` p < 0.001, `**` p < 0.01, `*` p < 0.05, `.` p < 0.1.",
              "ML standard errors are bootstrap estimates.", ""]
    return "\n".join(lines)


def emit_fit_report(rep: FitReport, out_dir) -> list[Path]:
    out = _prepare(out_dir)
    rows = [(r.method, r.coefficient, r.estimate, r.se, r.z, r.p_value, r.stars, r.n_used)
            for r in rep.rows]
    paths = [out / "fit_results.csv", out / "fit_summary.md", out / "metadata.json"]
    _write(paths[0], _csv_text(FIT_HEADER, rows))
    _write(paths[1], fit_markdown(rep))
    meta = dict(rep.meta)
    meta["accuracy"] = {m: float(a) for m, a in rep.accuracy.items()}
    _write(paths[2], json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return paths


def finite(values) -> bool:
    return bool(np.all(np.isfinite(np.asarray(values, dtype=float))))
