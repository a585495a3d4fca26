"""Sequential discrepancy principle on the geometric grid ``alpha_j = theta^j alpha_0``.

The walk starts at ``j_min`` (largest ``alpha``) and moves to smaller
``alpha`` with warm starts.  The first ``alpha_j`` whose discrepancy is at
most ``tau * delta`` while the discrepancy at ``alpha_{j-1} = alpha_j/theta``
exceeds it is returned.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .core import PenaltyConfig
from .operators import ForwardOperator, operator_norm
from .solver import SolverOptions, SolverResult, TikhonovProblem, solve

__all__ = [
    "SDPConfig",
    "SDPStep",
    "SDPTrace",
    "sdp_choose",
    "strong_dp_check",
    "sdp_lower_bound",
    "replay_bracket",
]

FOUND = "found"
EXHAUSTED_LOW = "grid_exhausted_low"
EXHAUSTED_HIGH = "grid_exhausted_high"
ZERO_FEASIBLE = "zero_feasible"


@dataclass(frozen=True)
class SDPConfig:
    theta: float = 0.5
    alpha0: float = 1.0
    tau: float = 1.5
    j_min: int = 0
    j_max: int = 60
    tau1: float | None = None
    tau2: float | None = None

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.tau > 1.0:
            raise ValueError("tau must exceed 1")
        if self.j_min >= self.j_max:
            raise ValueError("j_min must be smaller than j_max")
        if self.tau1 is not None or self.tau2 is not None:
            if self.tau1 is None or self.tau2 is None or not 1.0 <= self.tau1 <= self.tau2:
                raise ValueError("strong variant needs 1 <= tau1 <= tau2")

    def alpha(self, j: int) -> float:
        return self.theta**j * self.alpha0


@dataclass
class SDPStep:
    j: int
    alpha: float
    discrepancy: float
    objective: float
    support_size: int


@dataclass
class SDPTrace:
    """Audit trail of one discrepancy-principle walk.

    ``chosen`` and ``predecessor`` keep the solutions at ``alpha_*`` and
    ``alpha_*/theta`` so the bracket can be replayed without re-solving.
    """

    steps: list[SDPStep] = field(default_factory=list)
    chosen_j: int | None = None
    status: str = EXHAUSTED_LOW
    tau: float = float("nan")
    delta: float = float("nan")
    chosen: SolverResult | None = field(default=None, repr=False)
    predecessor: SolverResult | None = field(default=None, repr=False)

    CSV_COLUMNS = ("j", "alpha", "discrepancy", "objective", "support_size")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_COLUMNS)
        for s in self.steps:
            writer.writerow([s.j, repr(s.alpha), repr(s.discrepancy), repr(s.objective), s.support_size])
        return buf.getvalue()


def sdp_choose(
    op: ForwardOperator,
    y_delta,
    delta: float,
    penalty: PenaltyConfig,
    cfg: SDPConfig,
    solver_opts: SolverOptions | None = None,
) -> tuple[float | None, SolverResult | None, SDPTrace]:
    """Choose ``alpha`` by the sequential discrepancy principle.

    Returns ``(alpha_star, result, trace)``.  When no bracket is found inside
    ``[j_min, j_max]`` the first two entries are ``None`` and ``trace.status``
    says which end of the grid was hit.  If ``||y_delta|| <= tau * delta`` the
    zero solution is already feasible; ``alpha_{j_min}`` is returned with the
    zero vector and status ``"zero_feasible"``.
    """
    if not delta > 0:
        raise ValueError("the discrepancy principle needs delta > 0")
    y = np.asarray(y_delta, dtype=float)
    opts = solver_opts or SolverOptions()
    if opts.op_norm is None:
        opts = SolverOptions(**{**opts.__dict__, "op_norm": operator_norm(op)})
    level = cfg.tau * delta
    trace = SDPTrace(tau=cfg.tau, delta=delta)

    y_norm = math.sqrt(math.fsum(y * y))
    if y_norm <= level:
        alpha = cfg.alpha(cfg.j_min)
        x = np.zeros(op.shape[1])
        res = SolverResult(x, 0.5 * y_norm**2, y_norm, 0, True, ())
        trace.steps.append(SDPStep(cfg.j_min, alpha, y_norm, res.objective, 0))
        trace.chosen_j = cfg.j_min
        trace.status = ZERO_FEASIBLE
        trace.chosen = res
        return alpha, res, trace

    warm = opts.x0
    prev: SolverResult | None = None
    for j in range(cfg.j_min, cfg.j_max + 1):
        alpha = cfg.alpha(j)
        problem = TikhonovProblem(op, y, delta, penalty, alpha)
        run_opts = SolverOptions(**{**opts.__dict__, "x0": warm, "seed": opts.seed + j})
        res = solve(problem, run_opts)
        trace.steps.append(SDPStep(j, alpha, res.discrepancy, res.objective, len(res.support)))
        if res.discrepancy <= level:
            if prev is None:
                trace.status = EXHAUSTED_HIGH
                return None, None, trace
            trace.chosen_j = j
            trace.status = FOUND
            trace.chosen = res
            trace.predecessor = prev
            return alpha, res, trace
        prev = res
        warm = res.x
    trace.status = EXHAUSTED_LOW
    return None, None, trace


def replay_bracket(op: ForwardOperator, y_delta, trace: SDPTrace) -> bool:
    """Recompute both discrepancies from the stored solutions and check the bracket."""
    if trace.status != FOUND:
        return False
    y = np.asarray(y_delta, dtype=float)

    def disc(res):
        r = op.matrix @ res.x - y
        return math.sqrt(math.fsum(r * r))

    d_star = disc(trace.chosen)
    d_prev = disc(trace.predecessor)
    level = trace.tau * trace.delta
    return (
        d_star == trace.chosen.discrepancy
        and d_prev == trace.predecessor.discrepancy
        and d_star <= level < d_prev
    )


def strong_dp_check(trace: SDPTrace, delta: float, tau1: float, tau2: float) -> bool:
    """Whether some grid ``alpha`` has ``tau1 delta <= discrepancy <= tau2 delta``."""
    return any(tau1 * delta <= s.discrepancy <= tau2 * delta for s in trace.steps)


def sdp_lower_bound(alpha_star: float, delta: float, tau: float, theta: float, p: float, phi) -> tuple[float, bool]:
    """Lower bound ``theta/(p 2^(p-1)) (tau^p-1)/(tau^p+1) t^p / phi(t)``, ``t = (tau-1) delta``.

    ``phi`` is any callable index function (e.g. an
    :class:`~lqreg.rates.IndexFunctionTable`).  Returns the bound and whether
    ``alpha_star`` satisfies it.
    """
    t = (tau - 1.0) * delta
    phi_t = float(phi(t))
    if not phi_t > 0 or not math.isfinite(phi_t):
        raise ValueError(f"index function undefined or zero at t={t}")
    factor = theta / (p * 2.0 ** (p - 1.0)) * (tau**p - 1.0) / (tau**p + 1.0)
    bound = factor * t**p / phi_t
    return bound, bool(alpha_star >= bound)
