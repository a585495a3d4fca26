"""Range certificates, the index function and convergence-rate bookkeeping."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .core import DimensionError, PenaltyConfig, as_sequence, penalty_eval
from .operators import ForwardOperator

__all__ = [
    "RangeCertificate",
    "range_certificate",
    "range_certificates",
    "DecayProfile",
    "RateDescriptor",
    "predict_exponent",
    "IndexFunctionTable",
    "phi_table",
    "check_index_table",
    "RateFit",
    "fit_empirical_rate",
    "variational_inequality_check",
    "vi_trial_battery",
    "certificates_csv",
    "phi_csv",
]

DEFAULT_SVD_CUTOFF = 4e-3
DEFAULT_CERT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RangeCertificate:
    """Least-squares witness ``f`` for ``u_k = A* f``."""

    k: int
    f: np.ndarray
    residual: float
    f_norm: float
    cutoff: float
    rank: int

    def certified(self, cert_tol: float = DEFAULT_CERT_TOL) -> bool:
        return self.residual <= cert_tol


def _svd(op: ForwardOperator):
    if op.representation != "coefficient":
        raise ValueError("range certificates need a coefficient-representation operator")
    return np.linalg.svd(op.matrix, full_matrices=False)


def range_certificates(op: ForwardOperator, ks: Sequence[int], svd_cutoff: float = DEFAULT_SVD_CUTOFF):
    """Certificates for several 1-based indices sharing one SVD."""
    u, s, vt = _svd(op)
    n = op.shape[1]
    keep = s >= svd_cutoff * s[0]
    rank = int(np.count_nonzero(keep))
    out = []
    for k in ks:
        if not 1 <= k <= n:
            raise IndexError(f"basis index {k} outside 1..{n}")
        f = u[:, keep] @ (vt[keep, k - 1] / s[keep])
        e = np.zeros(n)
        e[k - 1] = 1.0
        resid = float(np.linalg.norm(op.matrix.T @ f - e))
        out.append(RangeCertificate(k, f, resid, float(np.linalg.norm(f)), svd_cutoff, rank))
    return out


def range_certificate(op: ForwardOperator, k: int, svd_cutoff: float = DEFAULT_SVD_CUTOFF) -> RangeCertificate:
    """Minimal-norm truncated-SVD solution of ``A^T f = e_k``.

    Singular values below ``svd_cutoff * sigma_max`` are discarded.
    """
    return range_certificates(op, [k], svd_cutoff)[0]


# {{{ predicted rates


@dataclass(frozen=True)
class DecayProfile:
    """``|x_k| <= K1 k^-mu`` and ``||f_k|| <= K2 k^nu`` (monomial), or an
    exponential tail ``sum_{k>n} |x_k|^q <= K1 exp(-n^gamma)``."""

    mu: float
    nu: float
    K1: float = 1.0
    K2: float = 1.0
    kind: str = "monomial"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("monomial", "exponential"):
            raise ValueError(f"unknown decay kind {self.kind!r}")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.kind == "monomial" and self.mu <= 1:
            raise ValueError("monomial decay needs mu > 1")
        if self.kind == "exponential" and not (self.gamma and self.gamma > 0):
            raise ValueError("exponential decay needs gamma > 0")


@dataclass(frozen=True)
class RateDescriptor:
    """Rate ``t^power * log(1/t^q)^log_power``."""

    power: float
    log_power: float
    q: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return t**self.power * np.log(1.0 / t**self.q) ** self.log_power

    def __str__(self):
        return f"t^{self.power:g} * log(1/t^{self.q:g})^{self.log_power:g}"


def predict_exponent(profile: DecayProfile, q: float, measure: str = "E_q"):
    """Predicted convergence exponent in ``delta``.

    Monomial decay gives ``(mu q - 1)/(mu + nu)`` for ``E_q`` and
    ``(mu - 1/q)/(mu + nu)`` for ``E_1``; ``mu q <= 1`` is rejected because
    the truth then leaves the penalty's domain.  Exponential decay returns a
    :class:`RateDescriptor` for the ``E_q`` index function.
    """
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    if profile.kind == "exponential":
        return RateDescriptor(q, profile.nu / profile.gamma, q)
    mu, nu = profile.mu, profile.nu
    if mu * q <= 1.0:
        raise ValueError(f"mu*q = {mu * q:g} <= 1: truth is not in the l^q domain")
    if measure == "E_q":
        return (mu * q - 1.0) / (mu + nu)
    if measure == "E_1":
        return (mu - 1.0 / q) / (mu + nu)
    raise ValueError(f"unknown error measure {measure!r}")


# }}}


# {{{ index function


@dataclass(frozen=True, eq=False)
class IndexFunctionTable:
    """Tabulated ``phi(t) = 2 min_n (tail_n + t^q W_n)``.

    ``tails[n] = sum_{k>n} w_k |x_k|^q`` (including ``tail_bound`` for the
    part beyond ``n_max``) and ``witness[n] = sum_{k in supp, k<=n} w_k ||f_k||^q``.
    Calling the table evaluates the minimum exactly at any ``t >= 0``.
    """

    t: np.ndarray
    values: np.ndarray
    argmin_n: np.ndarray
    q: float
    weights: np.ndarray
    n_max: int
    tail_bound: float
    tails: np.ndarray
    witness: np.ndarray

    def _terms(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0):
            raise ValueError("index function needs t >= 0")
        tq = np.where(t > 0, t, 1.0) ** self.q * (t > 0)
        with np.errstate(invalid="ignore"):
            terms = self.tails[None, :] + tq[:, None] * self.witness[None, :]
        # 0 * inf from missing certificates at t = 0
        terms = np.where(np.isnan(terms), np.inf, terms)
        return terms

    def __call__(self, t):
        vals = 2.0 * self._terms(t).min(axis=1)
        return vals if np.ndim(t) else float(vals[0])

    def argmin(self, t):
        idx = self._terms(t).argmin(axis=1)
        return idx if np.ndim(t) else int(idx[0])


def phi_table(
    xdag_coeffs,
    f_norms,
    penalty: PenaltyConfig,
    t_grid,
    n_max: int | None = None,
    tail_bound: float = 0.0,
    supp_tol: float = 0.0,
) -> IndexFunctionTable:
    """Build the index function from truth coefficients and witness norms.

    Parameters
    ----------
    xdag_coeffs : array_like
        Truth coefficients ``x_1 .. x_N``.
    f_norms : array_like
        ``||f_k||`` for ``k = 1 .. n_max``; entries outside the support are
        ignored, ``inf`` marks a missing certificate.
    t_grid : array_like
        Positive evaluation points.
    n_max : int, optional
        Truncation of the infimum; defaults to ``len(xdag_coeffs)``.
    tail_bound : float
        Upper bound for ``sum_{k>n_max} w_k |x_k|^q`` not represented in
        ``xdag_coeffs``.
    """
    x = as_sequence(xdag_coeffs, "xdag")
    n_max = x.size if n_max is None else int(n_max)
    if n_max > x.size:
        raise DimensionError("n_max exceeds the available truth coefficients")
    fn = np.asarray(f_norms, dtype=float)
    if fn.size < n_max:
        raise DimensionError("need a witness norm for every k <= n_max")
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t grid must be positive")
    q = penalty.q
    w = penalty.weights_for(x.size)
    a = w * np.abs(x) ** q
    a[x == 0] = 0.0
    # tails[n] = sum_{k > n}; accumulate smallest terms first
    tail_in = np.concatenate((np.cumsum(a[n_max:][::-1])[::-1], [0.0]))[0] if n_max < x.size else 0.0
    rev = np.cumsum(a[:n_max][::-1])[::-1]
    tails = np.concatenate((rev, [0.0])) + tail_in + tail_bound
    on_supp = np.abs(x[:n_max]) > supp_tol
    contrib = np.where(on_supp, w[:n_max] * fn[:n_max] ** q, 0.0)
    witness = np.concatenate(([0.0], np.cumsum(contrib)))
    table = IndexFunctionTable(
        t=t,
        values=np.empty(0),
        argmin_n=np.empty(0, dtype=int),
        q=q,
        weights=w,
        n_max=n_max,
        tail_bound=float(tail_bound),
        tails=tails,
        witness=witness,
    )
    object.__setattr__(table, "values", table(t) if t.ndim else np.atleast_1d(table(t)))
    object.__setattr__(table, "argmin_n", np.atleast_1d(table.argmin(t)))
    return table


def check_index_table(table: IndexFunctionTable, rtol: float = 1e-12) -> dict:
    """Monotonicity and midpoint concavity of the tabulated values."""
    order = np.argsort(table.t)
    t = table.t[order]
    v = table.values[order]
    slack = 2.0 * table.tail_bound + rtol * max(1.0, float(np.max(np.abs(v))))
    nondecreasing = bool(np.all(np.diff(v) >= -slack))
    mid = table(0.5 * (t[1:] + t[:-1]))
    concave = bool(np.all(mid >= 0.5 * (v[1:] + v[:-1]) - slack))
    arg = table.argmin_n[order]
    argmin_monotone = bool(np.all(np.diff(arg) <= 0))
    return {"nondecreasing": nondecreasing, "midpoint_concave": concave, "argmin_monotone": argmin_monotone}


# }}}


class RateFit(NamedTuple):
    exponent: float
    intercept: float
    r_squared: float
    stderr: float


def fit_empirical_rate(records, fit_range: tuple[float, float] | None = None) -> RateFit:
    """Least-squares line through ``(log delta, log error)``.

    ``records`` is an iterable of ``(delta, error)`` pairs; ``fit_range`` keeps
    only ``lo <= delta <= hi``.
    """
    pts = [(float(d), float(e)) for d, e in records]
    if fit_range is not None:
        lo, hi = fit_range
        pts = [(d, e) for d, e in pts if lo <= d <= hi]
    if len(pts) < 3:
        raise ValueError("need at least three points for a rate fit")
    d = np.array([p[0] for p in pts])
    e = np.array([p[1] for p in pts])
    if np.any(d <= 0) or np.any(e <= 0):
        raise ValueError("rate fit needs positive deltas and errors")
    res = stats.linregress(np.log(d), np.log(e))
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue**2), float(res.stderr))


def vi_trial_battery(xdag, n_trials: int = 1000, seed: int = 0, extra=()) -> list[np.ndarray]:
    """Seeded trial vectors: ``0``, ``+-xdag``, dense and sparse random
    vectors on several scales, and perturbations of ``xdag``."""
    xdag = as_sequence(xdag, "xdag")
    n = xdag.size
    rng = np.random.Generator(np.random.Philox(key=seed))
    scale = max(float(np.max(np.abs(xdag))), 1e-12)
    out = [np.zeros(n), xdag.copy(), -xdag]
    out.extend(np.asarray(e, dtype=float) for e in extra)
    kinds = ("dense", "sparse", "perturb", "scaled")
    i = 0
    while len(out) < n_trials:
        kind = kinds[i % len(kinds)]
        mag = scale * 10.0 ** rng.uniform(-6, 1)
        if kind == "dense":
            v = mag * rng.standard_normal(n)
        elif kind == "sparse":
            v = np.zeros(n)
            idx = rng.choice(n, size=min(n, int(rng.integers(1, 6))), replace=False)
            v[idx] = mag * rng.standard_normal(idx.size)
        elif kind == "perturb":
            v = xdag + mag * rng.standard_normal(n) * (rng.random(n) < 0.3)
        else:
            v = rng.uniform(-2, 2) * xdag
        out.append(v)
        i += 1
    return out[:n_trials] if n_trials >= 3 else out


def variational_inequality_check(
    op: ForwardOperator,
    xdag,
    phi,
    penalty: PenaltyConfig,
    trial_xs,
) -> float:
    """``max over trials of R(x - xdag) - [R(x) - R(xdag) + phi(||A(x - xdag)||)]``.

    ``phi`` is an :class:`IndexFunctionTable` or any callable index function.
    A non-positive return means the inequality held on every trial.
    """
    xdag = as_sequence(xdag, "xdag")
    r_dag = penalty_eval(xdag, penalty)
    worst = -math.inf
    for x in trial_xs:
        x = as_sequence(x)
        d = x - xdag
        lhs = penalty_eval(d, penalty)
        t = float(np.linalg.norm(op.matrix @ d))
        rhs = penalty_eval(x, penalty) - r_dag + float(phi(t))
        worst = max(worst, lhs - rhs)
    return worst


def certificates_csv(certs: Sequence[RangeCertificate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("k", "residual", "f_norm"))
    for c in certs:
        w.writerow((c.k, repr(c.residual), repr(c.f_norm)))
    return buf.getvalue()


def phi_csv(table: IndexFunctionTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "phi", "argmin_n", "tail_bound"))
    for t, v, n in zip(table.t, table.values, table.argmin_n):
        w.writerow((repr(float(t)), repr(float(v)), int(n), repr(table.tail_bound)))
    return buf.getvalue()
