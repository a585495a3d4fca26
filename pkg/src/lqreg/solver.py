"""Proximal-gradient minimization of the l^q_w Tikhonov functional.

The functional is ``T(x) = (1/2) ||A x - y||^2 + alpha * sum_k w_k |x_k|^q``
with ``0 < q <= 1``.  Every iteration applies the separable scalar prox

    argmin_z  (1/2) (z - v)^2 + lam |z|^q

which is available in closed form for ``q = 1`` (soft thresholding) and
``q = 1/2`` (half thresholding) and by a monotone Newton solve otherwise.
Because the prox returns the *global* scalar minimizer and the step is at
most ``1/||A||^2``, the objective never increases.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import DimensionError, PenaltyConfig, as_sequence, penalty_eval, support_of
from .operators import ForwardOperator, operator_norm

__all__ = [
    "TikhonovProblem",
    "SolverOptions",
    "SolverResult",
    "prox",
    "prox_scalar",
    "prox_threshold",
    "objective_eval",
    "solve",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TikhonovProblem:
    """Coefficient-space Tikhonov problem; ``p`` is fixed to 2."""

    op: ForwardOperator
    y_delta: np.ndarray
    delta: float
    penalty: PenaltyConfig
    alpha: float
    p: int = 2

    def __post_init__(self):
        if self.op.representation != "coefficient":
            raise ValueError("the solver works on coefficient-representation operators")
        y = np.asarray(self.y_delta, dtype=float)
        if y.ndim != 1 or y.size != self.op.shape[0]:
            raise DimensionError(f"data must have length {self.op.shape[0]}")
        if not np.all(np.isfinite(y)):
            raise ValueError("data contains non-finite entries")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.p != 2:
            raise ValueError("only p = 2 is supported")
        self.penalty.weights_for(self.op.shape[1])
        object.__setattr__(self, "y_delta", y)

    @property
    def n(self) -> int:
        return self.op.shape[1]

    def with_alpha(self, alpha: float) -> "TikhonovProblem":
        return replace(self, alpha=float(alpha))


@dataclass
class SolverOptions:
    """Iteration controls.

    ``rel_tol`` bounds both the relative objective change and the l^2 move of
    one proximal step (scaled by ``max(1, ||x||)``).  ``accelerate`` switches
    to monotone FISTA with adaptive restart.  ``restarts`` extra perturbed
    starts are used only for ``q < 1``; for ``q < 1`` and at most
    ``support_search`` unknowns the least-squares solution on every support
    pattern is added as a start as well.  ``separable`` is ``"auto"`` (use the
    exact componentwise minimizer when the columns of ``A`` are orthogonal),
    ``"never"`` or ``"always"``.
    """

    max_iter: int = 20000
    rel_tol: float = 1e-10
    x0: np.ndarray | None = None
    seed: int = 0
    restarts: int = 5
    support_search: int = 6
    accelerate: bool = False
    step_safety: float = 1.01
    op_norm: float | None = None
    separable: str = "auto"


@dataclass
class SolverResult:
    x: np.ndarray
    objective: float
    discrepancy: float
    iterations: int
    converged: bool
    support: tuple[int, ...] = field(default=())
    history: list[float] | None = field(default=None, repr=False)


# {{{ scalar prox


def prox_threshold(lam, q: float):
    """Smallest ``|v|`` for which the prox is nonzero (ties go to zero)."""
    lam = np.asarray(lam, dtype=float)
    if q == 1.0:
        return lam
    z_t = (2.0 * lam * (1.0 - q)) ** (1.0 / (2.0 - q))
    return z_t * (2.0 - q) / (2.0 * (1.0 - q))


def _newton_root(a, lam, q, max_iter=100):
    # larger root of z + lam q z^(q-1) = a; Newton from z = a decreases
    # monotonically onto the root because the left side is convex there
    z = a.copy()
    for _ in range(max_iter):
        zq = z ** (q - 1.0)
        g = z + lam * q * zq - a
        dg = 1.0 - lam * q * (1.0 - q) * zq / z
        step = g / dg
        z_new = z - step
        if np.all(np.abs(step) <= 4e-16 * np.abs(z_new)):
            z = z_new
            break
        z = z_new
    return z


def prox(v, lam, q: float) -> np.ndarray:
    """Vectorized global minimizer of ``(1/2)(z - v)^2 + lam |z|^q``."""
    v = np.asarray(v, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), v.shape)
    q = float(q)
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    if np.any(lam <= 0):
        raise ValueError("lam must be positive")
    a = np.abs(v)
    if q == 1.0:
        return np.sign(v) * np.maximum(a - lam, 0.0)
    out = np.zeros_like(v)
    on = a > prox_threshold(lam, q)
    if not np.any(on):
        return out
    a_on, l_on = a[on], lam[on]
    if q == 0.5:
        # half thresholding: trigonometric solution of the depressed cubic
        phi = np.arccos(np.clip((l_on / 4.0) * (a_on / 3.0) ** -1.5, -1.0, 1.0))
        z = (2.0 / 3.0) * a_on * (1.0 + np.cos(2.0 * math.pi / 3.0 - (2.0 / 3.0) * phi))
    else:
        z = _newton_root(a_on, l_on, q)
    # guard the boundary of the thresholding region against round-off
    keep = 0.5 * (z - a_on) ** 2 + l_on * z**q < 0.5 * a_on**2
    z = np.where(keep, z, 0.0)
    out[on] = np.sign(v[on]) * z
    return out


def prox_scalar(v: float, lam: float, q: float) -> float:
    """Scalar version of :func:`prox`."""
    return float(prox(np.array([v]), np.array([lam]), q)[0])


# }}}


def _objective_parts(problem: TikhonovProblem, x: np.ndarray):
    r = problem.op.matrix @ x - problem.y_delta
    sq = math.fsum(r * r)
    pen = penalty_eval(x, problem.penalty)
    return 0.5 * sq + problem.alpha * pen, math.sqrt(sq)


def objective_eval(problem: TikhonovProblem, x) -> float:
    """``(1/2) ||A x - y||^2 + alpha R_{q,w}(x)``."""
    x = as_sequence(x)
    if x.size != problem.n:
        raise DimensionError(f"expected {problem.n} coefficients, got {x.size}")
    return _objective_parts(problem, x)[0]


def _run(problem, x_start, step, opts, keep_history):
    A = problem.op.matrix
    y = problem.y_delta
    q = problem.penalty.q
    lam = step * problem.alpha * problem.penalty.weights_for(problem.n)
    tol = opts.rel_tol

    def T(x):
        return prox(x - step * (A.T @ (A @ x - y)), lam, q)

    def F(x):
        return _objective_parts(problem, x)[0]

    x = T(x_start)
    fx = F(x)
    history = [fx] if keep_history else None
    x_prev = x
    t = 1.0
    y_acc = x
    converged = False
    it = 1
    while it < opts.max_iter:
        it += 1
        if opts.accelerate:
            z = T(y_acc)
            fz = F(z)
            if fz <= fx:
                x_prev, x, f_old, fx = x, z, fx, fz
                t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
                y_acc = x + ((t - 1.0) / t_new) * (x - x_prev)
                t = t_new
            else:
                # adaptive restart: drop momentum and take a plain step next
                f_old = fx
                t = 1.0
                y_acc = x
                if keep_history:
                    history.append(fx)
                continue
        else:
            x_prev, x = x, T(x)
            f_old, fx = fx, F(x)
        if keep_history:
            history.append(fx)
        if abs(f_old - fx) <= tol * max(abs(f_old), 1e-300):
            move_tol = tol * max(1.0, float(np.linalg.norm(x)))
            probe = T(x) if opts.accelerate else x
            move = np.linalg.norm(probe - x) if opts.accelerate else np.linalg.norm(x - x_prev)
            if move <= move_tol:
                converged = True
                break
    return x, it, converged, history


def _column_gram(A: np.ndarray, tol: float = 1e-13):
    """Squared column norms if the columns of ``A`` are mutually orthogonal."""
    gram = A.T @ A
    d = np.diag(gram).copy()
    off = gram - np.diag(d)
    scale = float(np.max(d)) if d.size else 0.0
    if scale == 0.0 or np.max(np.abs(off)) > tol * scale:
        return None
    return d


def _solve_separable(problem: TikhonovProblem, d: np.ndarray):
    # 1/2||Ax - y||^2 = 1/2 sum_k d_k (x_k - b_k/d_k)^2 + const for orthogonal columns
    b = problem.op.matrix.T @ problem.y_delta
    w = problem.penalty.weights_for(problem.n)
    x = np.zeros(problem.n)
    on = d > 0
    x[on] = prox(b[on] / d[on], problem.alpha * w[on] / d[on], problem.penalty.q)
    return x


def _pattern_starts(A: np.ndarray, y: np.ndarray):
    # non-convex landscape: one start inside the basin of every support pattern
    n = A.shape[1]
    for mask in range(1, 2**n):
        cols = [k for k in range(n) if mask >> k & 1]
        x = np.zeros(n)
        x[cols] = np.linalg.lstsq(A[:, cols], y, rcond=None)[0]
        yield x


def solve(problem: TikhonovProblem, opts: SolverOptions | None = None, keep_history: bool = False, **kw) -> SolverResult:
    """Minimize the Tikhonov functional of ``problem``.

    With orthogonal columns the functional decouples and the exact global
    minimizer is returned after one componentwise prox.  Otherwise proximal
    gradient iterations are used.  Keyword arguments override fields of
    ``opts``.  For ``q < 1`` the iterative run is repeated from
    ``opts.restarts`` seeded perturbations of the warm start (and, for small
    problems, from least-squares solutions on each support pattern) and the
    lowest objective wins.
    """
    opts = replace(opts or SolverOptions(), **kw)
    if opts.separable not in ("auto", "never", "always"):
        raise ValueError(f"unknown separable mode {opts.separable!r}")
    if opts.separable != "never":
        d = _column_gram(problem.op.matrix)
        if d is None and opts.separable == "always":
            raise ValueError("operator columns are not orthogonal")
        if d is not None:
            x = _solve_separable(problem, d)
            obj, disc = _objective_parts(problem, x)
            return SolverResult(x, obj, disc, 1, True, support_of(x), [obj] if keep_history else None)
    norm = opts.op_norm if opts.op_norm is not None else operator_norm(problem.op)
    n = problem.n
    if norm == 0.0:
        x = np.zeros(n)
        obj, disc = _objective_parts(problem, x)
        return SolverResult(x, obj, disc, 0, True, ())
    step = 1.0 / (opts.step_safety * norm) ** 2
    x0 = np.zeros(n) if opts.x0 is None else as_sequence(opts.x0, "x0")
    if x0.size != n:
        raise DimensionError(f"warm start must have length {n}")

    starts = [x0]
    if problem.penalty.q < 1.0 and opts.restarts > 0:
        rng = np.random.Generator(np.random.Philox(key=opts.seed))
        landweber = step * (problem.op.matrix.T @ problem.y_delta)
        scale = 0.5 * max(np.max(np.abs(x0)), np.max(np.abs(landweber)))
        for _ in range(opts.restarts):
            starts.append(x0 + scale * rng.standard_normal(n))
    if problem.penalty.q < 1.0 and n <= opts.support_search:
        starts.extend(_pattern_starts(problem.op.matrix, problem.y_delta))

    best = None
    total = 0
    for start in starts:
        x, it, conv, hist = _run(problem, start, step, opts, keep_history)
        total += it
        obj, disc = _objective_parts(problem, x)
        if best is None or obj < best[1]:
            best = (x, obj, disc, conv, hist)
    x, obj, disc, conv, hist = best
    if not conv:
        log.debug("solver hit max_iter=%d (alpha=%g)", opts.max_iter, problem.alpha)
    return SolverResult(x, obj, disc, total, conv, support_of(x), hist)
