"""Noise-level sweeps with the discrepancy principle and rate reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import median

import numpy as np

from ..basis import Grid, make_basis
from ..core import error_measures
from ..operators import (
    ForwardOperator,
    build_operator,
    default_grid_and_basis,
    operator_norm,
    to_coefficients,
)
from ..rates import DecayProfile, fit_empirical_rate, phi_table, predict_exponent, range_certificates
from ..regparam import FOUND, sdp_choose, sdp_lower_bound
from .config import ConfigError, ExperimentConfig, truth_coefficients
from .noise import GENERATOR, gen_noise

__all__ = ["RateRow", "RateReport", "build_setup", "run_experiment", "CSV_FORMAT", "CSV_COLUMNS"]

log = logging.getLogger(__name__)

CSV_FORMAT = "lqreg-rate-report/1"
SUMMARY_FORMAT = "lqreg-rate-summary/1"
CSV_COLUMNS = (
    "delta",
    "seed",
    "alpha_star",
    "discrepancy",
    "E_q",
    "E_1",
    "E_2",
    "iterations",
    "support_size",
    "sdp_status",
)
THREADS_ENV = "LQREG_THREADS"


@dataclass
class RateRow:
    delta: float
    seed: int
    alpha_star: float
    discrepancy: float
    E_q: float
    E_1: float
    E_2: float
    iterations: int
    support_size: int
    sdp_status: str

    def csv_fields(self):
        return (
            repr(self.delta),
            self.seed,
            repr(self.alpha_star),
            repr(self.discrepancy),
            repr(self.E_q),
            repr(self.E_1),
            repr(self.E_2),
            self.iterations,
            self.support_size,
            self.sdp_status,
        )


@dataclass
class RateReport:
    rows: list[RateRow]
    summary: dict
    lower_bound_flags: list[bool | None] = field(default_factory=list, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_FORMAT} generator={GENERATOR}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"

    def write(self, csv_path=None, summary_path=None) -> None:
        if csv_path is not None:
            with open(csv_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(self.to_csv())
        if summary_path is not None:
            with open(summary_path, "w", encoding="utf-8") as fh:
                fh.write(self.summary_json())


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


@dataclass(frozen=True, eq=False)
class Setup:
    op: ForwardOperator
    xdag: np.ndarray
    y: np.ndarray
    op_norm: float
    grid: Grid | None = None


def build_setup(cfg: ExperimentConfig) -> Setup:
    """Coefficient-space operator, truth and exact data for a config."""
    spec = dict(cfg.operator)
    label = spec["label"]
    grid = None
    try:
        if label in ("diagonal", "hegland"):
            op = build_operator({**spec, "n_basis": cfg.n_basis})
        else:
            grid, basis = default_grid_and_basis(label, cfg.n_points, cfg.n_basis)
            if cfg.basis is not None and cfg.basis != basis.label:
                basis = make_basis(cfg.basis, grid, cfg.n_basis)
                if basis.n_basis != cfg.n_basis:
                    raise ConfigError("canonical basis needs n_basis == n_points")
            op = to_coefficients(build_operator(spec, grid), basis)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    xdag = truth_coefficients(cfg.truth, cfg.n_basis)
    return Setup(op, xdag, op.matrix @ xdag, operator_norm(op), grid)


def _predicted(cfg: ExperimentConfig):
    """Predicted exponent for the fitted measure, or ``None``."""
    measure = cfg.fit_measure
    q = cfg.penalty.q
    if measure == "E_2":
        return None
    truth = cfg.truth
    nu = cfg.prediction.get("nu")
    if nu is None and cfg.operator["label"] == "diagonal":
        nu = float(cfg.operator.get("decay", 1.0))
    if truth["kind"] == "sparse":
        return 1.0 if measure == "E_1" else q
    if nu is None:
        return None
    if truth["kind"] == "monomial":
        mu = float(cfg.prediction.get("mu", truth["mu"]))
        return predict_exponent(DecayProfile(mu, nu), q, measure)
    if truth["kind"] == "exponential" and measure == "E_q":
        desc = predict_exponent(DecayProfile(2.0, nu, kind="exponential", gamma=truth["gamma"]), q)
        return str(desc)
    return None


def _nan_row(delta, seed, status) -> RateRow:
    nan = float("nan")
    return RateRow(delta, seed, nan, nan, nan, nan, nan, 0, 0, status)


def _run_row(cfg: ExperimentConfig, setup: Setup, index: int, delta: float, seed: int):
    y_delta = gen_noise(setup.y, delta, seed, stream=index)
    opts = replace(cfg.solver, seed=seed, op_norm=setup.op_norm)
    try:
        alpha, res, trace = sdp_choose(setup.op, y_delta, delta, cfg.penalty, cfg.sdp, opts)
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        log.warning("row delta=%g seed=%d failed: %s", delta, seed, exc)
        return _nan_row(delta, seed, "solver_error")
    if res is None:
        return _nan_row(delta, seed, trace.status)
    em = error_measures(res.x, setup.xdag, cfg.penalty)
    return RateRow(
        delta, seed, alpha, res.discrepancy, em.E_q, em.E_1, em.E_2, res.iterations, len(res.support), trace.status
    )


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _certificate_summary(cfg, setup):
    n = setup.op.shape[1]
    certs = range_certificates(setup.op, range(1, n + 1), cfg.svd_cutoff)
    ok = [c.residual <= cfg.cert_tol for c in certs]
    head = [
        {"k": c.k, "residual": c.residual, "f_norm": c.f_norm, "certified": good}
        for c, good in zip(certs[:10], ok)
    ]
    summary = {
        "svd_cutoff": cfg.svd_cutoff,
        "cert_tol": cfg.cert_tol,
        "n_certified": int(sum(ok)),
        "n_total": n,
        "leading": head,
    }
    return certs, ok, summary


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RateReport:
    """Sweep ``delta_grid x seeds``, choose ``alpha`` by SDP and fit a rate.

    Rows are ordered by ``delta`` descending then seed ascending whatever the
    execution order; the thread count comes from ``LQREG_THREADS``.
    """
    setup = build_setup(cfg)
    jobs = [(i, d, s) for i, d in enumerate(cfg.delta_grid) for s in sorted(cfg.seeds)]
    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda job: _run_row(cfg, setup, *job), jobs))
    else:
        rows = [_run_row(cfg, setup, *job) for job in jobs]
    rows.sort(key=lambda r: (-r.delta, r.seed))

    certs, ok, cert_summary = _certificate_summary(cfg, setup)
    flags = _lower_bound_flags(cfg, setup, certs, ok, rows)

    measure = cfg.fit_measure
    per_delta = {}
    for r in rows:
        if r.sdp_status == FOUND:
            per_delta.setdefault(r.delta, []).append(getattr(r, measure))
    medians = sorted(((d, median(v)) for d, v in per_delta.items()), reverse=True)
    fit = None
    fit_note = None
    usable = [(d, e) for d, e in medians if e > 0]
    if cfg.fit_range is not None:
        lo, hi = cfg.fit_range
        usable = [(d, e) for d, e in usable if lo <= d <= hi]
    if len(usable) >= 3:
        f = fit_empirical_rate(usable)
        fit = {
            "exponent": f.exponent,
            "stderr": f.stderr,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
            "n_deltas": len(usable),
        }
    else:
        fit_note = f"fit skipped: {len(usable)} usable noise levels (need 3)"

    statuses = {}
    for r in rows:
        statuses[r.sdp_status] = statuses.get(r.sdp_status, 0) + 1
    checked = [f for f in flags if f is not None]
    summary = {
        "format": SUMMARY_FORMAT,
        "name": cfg.name,
        "generator": GENERATOR,
        "operator": cfg.operator,
        "n_basis": cfg.n_basis,
        "q": cfg.penalty.q,
        "measure": measure,
        "medians": [{"delta": d, measure: e} for d, e in medians],
        "fit": fit,
        "fit_note": fit_note,
        "predicted_exponent": _predicted(cfg),
        "certificates": cert_summary,
        "sdp_status_counts": statuses,
        "sdp_lower_bound": {
            "checked": len(checked),
            "satisfied": int(sum(checked)),
        },
    }
    _scrub_nan(summary)
    report = RateReport(rows, summary, flags)
    if write:
        report.write(cfg.csv_path, cfg.summary_path)
    return report


def _lower_bound_flags(cfg, setup, certs, ok, rows):
    """Check the SDP lower bound per row when every support index is certified."""
    supp = np.flatnonzero(setup.xdag)
    if not all(ok[k] for k in supp):
        return [None] * len(rows)
    f_norms = np.array([c.f_norm if good else math.inf for c, good in zip(certs, ok)])
    # a finite truncation: the truth has no tail beyond n_basis
    t = sorted({(cfg.sdp.tau - 1.0) * r.delta for r in rows})
    table = phi_table(setup.xdag, f_norms, cfg.penalty, t)
    flags = []
    for r in rows:
        if r.sdp_status != FOUND:
            flags.append(None)
            continue
        _, good = sdp_lower_bound(r.alpha_star, r.delta, cfg.sdp.tau, cfg.sdp.theta, 2, table)
        flags.append(good)
    return flags


def _scrub_nan(obj):
    # strict JSON: NaN becomes null
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, float) and not math.isfinite(v):
                obj[k] = None
            else:
                _scrub_nan(v)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            if isinstance(v, float) and not math.isfinite(v):
                obj[i] = None
            else:
                _scrub_nan(v)
