"""Seeded noise with an exactly prescribed norm.

The stream is numpy's Philox-4x64 counter-based generator keyed by the seed
and offset by a stream id, so any ``(seed, stream)`` pair can be replayed
independently of execution order.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["GENERATOR", "noise_stream", "gen_noise"]

GENERATOR = "numpy.Philox4x64(key=seed, counter=[0, 0, 0, stream]) + standard_normal"

_MAX_RESAMPLE = 16


def noise_stream(seed: int, stream: int = 0) -> np.random.Generator:
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream id must be nonnegative")
    bitgen = np.random.Philox(key=seed, counter=[0, 0, 0, stream])
    return np.random.Generator(bitgen)


def gen_noise(y_exact, delta: float, seed: int, stream: int = 0) -> np.ndarray:
    """``y + delta * n / ||n||`` with Gaussian ``n`` from :func:`noise_stream`.

    A zero draw is replaced by the next draw of the same stream.
    """
    y = np.asarray(y_exact, dtype=float)
    if not delta >= 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return y.copy()
    rng = noise_stream(seed, stream)
    for _ in range(_MAX_RESAMPLE):
        n = rng.standard_normal(y.shape)
        nrm = math.sqrt(math.fsum(n.ravel() * n.ravel()))
        if nrm > 0:
            return y + (delta / nrm) * n
    raise RuntimeError("noise stream produced only zero vectors")
