"""Coefficient sequences, weighted l^q quasi-norms and error measures.

All sequences are finite truncations stored as 1-D float arrays.  The
penalty ``R_{q,w}(x) = sum_k w_k |x_k|^q`` is accumulated with
:func:`math.fsum` so that tail sums of slowly decaying sequences keep
their digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "DimensionError",
    "PenaltyConfig",
    "ErrorMeasures",
    "as_sequence",
    "penalty_eval",
    "penalty_terms",
    "quasi_norm",
    "error_measures",
    "support_of",
]


class DimensionError(ValueError):
    """Raised when array lengths do not agree."""


def as_sequence(x, name: str = "x") -> np.ndarray:
    """Validate ``x`` as a coefficient sequence and return a float copy."""
    arr = np.atleast_1d(np.array(x, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class PenaltyConfig:
    """Exponent and weights of the penalty ``sum_k w_k |x_k|^q``.

    Parameters
    ----------
    q : float
        Exponent in ``(0, 1]``.
    weights : array_like
        Positive weights; only the first ``len(x)`` are used.
    w0 : float, optional
        Certified lower bound on the weights.  Defaults to ``min(weights)``.
    """

    q: float
    weights: np.ndarray
    w0: float | None = None

    def __post_init__(self):
        q = float(self.q)
        if not 0.0 < q <= 1.0:
            raise ValueError(f"q must lie in (0, 1], got {q}")
        w = as_sequence(self.weights, "weights")
        w.setflags(write=False)
        w0 = float(np.min(w)) if self.w0 is None else float(self.w0)
        if w0 <= 0.0:
            raise ValueError("weight floor w0 must be positive")
        if np.any(w < w0):
            raise ValueError("all weights must be >= w0")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "w0", w0)

    @classmethod
    def uniform(cls, q: float, n: int) -> "PenaltyConfig":
        return cls(q, np.ones(n))

    def with_q(self, q: float) -> "PenaltyConfig":
        return PenaltyConfig(q, self.weights, self.w0)

    def weights_for(self, n: int) -> np.ndarray:
        if self.weights.size < n:
            raise DimensionError(
                f"penalty has {self.weights.size} weights but sequence has length {n}"
            )
        return self.weights[:n]


def _abs_pow(x: np.ndarray, q: float) -> np.ndarray:
    # |0|^q = 0 for every q > 0
    a = np.abs(x)
    if q == 1.0:
        return a
    out = np.zeros_like(a)
    nz = a > 0
    out[nz] = a[nz] ** q
    return out


def penalty_terms(x, cfg: PenaltyConfig) -> np.ndarray:
    """Per-coefficient terms ``w_k |x_k|^q``."""
    x = as_sequence(x)
    return cfg.weights_for(x.size) * _abs_pow(x, cfg.q)


def penalty_eval(x, cfg: PenaltyConfig) -> float:
    """Evaluate ``R_{q,w}(x) = sum_k w_k |x_k|^q``."""
    return math.fsum(penalty_terms(x, cfg))


def quasi_norm(x, cfg: PenaltyConfig | float) -> float:
    """Return ``(sum_k w_k |x_k|^q)^(1/q)``.

    ``cfg`` may also be a bare exponent in ``(0, 2]`` with unit weights; this
    is how the plain l^2 norm is obtained (``quasi_norm(x, 2.0)``).
    """
    if isinstance(cfg, PenaltyConfig):
        return penalty_eval(x, cfg) ** (1.0 / cfg.q)
    q = float(cfg)
    if not 0.0 < q <= 2.0:
        raise ValueError(f"exponent must lie in (0, 2], got {q}")
    x = as_sequence(x)
    return math.fsum(_abs_pow(x, q)) ** (1.0 / q)


class ErrorMeasures(NamedTuple):
    E_q: float
    E_1: float
    E_2: float


def error_measures(x, xdag, cfg: PenaltyConfig) -> ErrorMeasures:
    """Error measures of ``x`` against the reference ``xdag``.

    ``E_q = R_{q,w}(x - xdag)``, ``E_1 = R_{1,w}(x - xdag)`` and ``E_2`` is the
    l^2 distance.
    """
    x = as_sequence(x)
    xdag = as_sequence(xdag, "xdag")
    if x.size != xdag.size:
        raise DimensionError(f"length mismatch: {x.size} vs {xdag.size}")
    d = x - xdag
    e_q = penalty_eval(d, cfg)
    e_1 = math.fsum(cfg.weights_for(d.size) * np.abs(d))
    e_2 = math.sqrt(math.fsum(d * d))
    return ErrorMeasures(e_q, e_1, e_2)


def support_of(x, tol: float = 0.0) -> tuple[int, ...]:
    """1-based indices ``k`` with ``|x_k| > tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    x = as_sequence(x)
    return tuple(int(k) + 1 for k in np.flatnonzero(np.abs(x) > tol))
