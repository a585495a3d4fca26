"""Experiment configuration: JSON documents checked against a shipped schema."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..core import PenaltyConfig
from ..regparam import SDPConfig
from ..solver import SolverOptions

__all__ = ["ConfigError", "ExperimentConfig", "load_schema", "parse_config", "load_config", "truth_coefficients"]

SCHEMA_FILE = "experiment.schema.json"


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


def load_schema() -> dict:
    text = resources.files(__package__).joinpath(SCHEMA_FILE).read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    operator: dict
    basis: str | None
    n_basis: int
    n_points: int | None
    truth: dict
    penalty: PenaltyConfig
    sdp: SDPConfig
    delta_grid: tuple[float, ...]
    seeds: tuple[int, ...]
    solver: SolverOptions
    fit_measure: str = "E_1"
    fit_range: tuple[float, float] | None = None
    prediction: dict = field(default_factory=dict)
    svd_cutoff: float = 4e-3
    cert_tol: float = 1e-6
    csv_path: Path | None = None
    summary_path: Path | None = None
    name: str = ""
    raw: dict = field(default_factory=dict, repr=False)


def truth_coefficients(truth: dict, n: int) -> np.ndarray:
    """Truth coefficient vector of length ``n`` from a truth spec."""
    kind = truth["kind"]
    k = np.arange(1, n + 1, dtype=float)
    if kind == "explicit":
        c = np.asarray(truth["coefficients"], dtype=float)
        if c.size > n:
            raise ConfigError(f"{c.size} explicit coefficients for n_basis={n}")
        return np.concatenate((c, np.zeros(n - c.size)))
    if kind == "monomial":
        return truth.get("K1", 1.0) * k ** (-float(truth["mu"]))
    if kind == "exponential":
        return truth.get("K1", 1.0) * np.exp(-(k ** float(truth["gamma"])))
    if kind == "sparse":
        x = np.zeros(n)
        for idx, val in truth["entries"]:
            if idx > n:
                raise ConfigError(f"sparse entry at k={idx} beyond n_basis={n}")
            x[idx - 1] = val
        return x
    raise ConfigError(f"unknown truth kind {kind!r}")


def _penalty(spec: dict, n: int) -> PenaltyConfig:
    q = float(spec["q"])
    w = spec.get("weights", {"kind": "uniform"})
    if w["kind"] == "uniform":
        return PenaltyConfig(q, np.full(n, float(w.get("value", 1.0))))
    if w["kind"] == "explicit":
        vals = np.asarray(w["values"], dtype=float)
        if vals.size < n:
            raise ConfigError(f"{vals.size} explicit weights for n_basis={n}")
        return PenaltyConfig(q, vals[:n], w.get("w0"))
    w0 = float(w.get("w0", 1.0))
    return PenaltyConfig(q, w0 * np.arange(1, n + 1, dtype=float) ** float(w["exponent"]), w0)


def parse_config(doc: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a decoded JSON document and build typed pieces."""
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    deltas = tuple(float(d) for d in doc["delta_grid"])
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigError("delta_grid must be strictly descending")
    seeds = tuple(doc["seeds"])
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    res = doc["resolution"]
    n_basis = res["n_basis"]
    op = dict(doc["operator"])
    if op["label"] in ("diagonal", "hegland"):
        if "basis" in doc and doc["basis"]["label"] != "canonical":
            raise ConfigError(f"operator {op['label']!r} is defined on coefficients only")
    elif "n_points" not in res:
        raise ConfigError(f"operator {op['label']!r} needs resolution.n_points")
    if op["label"] == "hegland" and n_basis < 2:
        raise ConfigError("hegland needs n_basis >= 2")
    try:
        penalty = _penalty(doc["penalty"], n_basis)
        sdp = SDPConfig(**doc["sdp"])
        solver = SolverOptions(**doc.get("solver", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    fit = doc.get("fit", {})
    fit_range = tuple(sorted(fit["range"])) if "range" in fit else None
    certs = doc.get("certificates", {})
    out = doc.get("output", {})
    base = base_dir or Path.cwd()

    def _path(key):
        return None if key not in out else (base / out[key])

    truth = doc["truth"]
    truth_coefficients(truth, n_basis)
    if truth["kind"] == "monomial" and truth["mu"] * penalty.q <= 1:
        raise ConfigError("monomial truth with mu*q <= 1 is not in the penalty's domain")
    return ExperimentConfig(
        operator=op,
        basis=doc.get("basis", {}).get("label"),
        n_basis=n_basis,
        n_points=res.get("n_points"),
        truth=truth,
        penalty=penalty,
        sdp=sdp,
        delta_grid=deltas,
        seeds=seeds,
        solver=solver,
        fit_measure=fit.get("measure", "E_1"),
        fit_range=fit_range,
        prediction=dict(doc.get("prediction", {})),
        svd_cutoff=float(certs.get("svd_cutoff", 4e-3)),
        cert_tol=float(certs.get("cert_tol", 1e-6)),
        csv_path=_path("csv"),
        summary_path=_path("summary"),
        name=doc.get("name", ""),
        raw=doc,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(doc, path.parent)


def _reject_constant(name):
    raise ConfigError(f"non-finite constant {name} in config")
