"""Brute-force reference minimizers shared by the solver tests."""

import itertools

import numpy as np


def scalar_objective(z, v, lam, q):
    return 0.5 * (z - v) ** 2 + lam * np.abs(z) ** q


def scalar_grid_oracle(v, lam, q, lo=-5.0, hi=5.0, step=1e-5):
    z = np.arange(lo, hi + step / 2, step)
    z[np.argmin(np.abs(z))] = 0.0  # the grid must contain the sparse candidate
    f = scalar_objective(z, v, lam, q)
    i = int(np.argmin(f))
    return z[i], f[i]


def tikhonov_objective(A, y, alpha, q, X):
    """Objective at each row of ``X``."""
    r = X @ A.T - y
    return 0.5 * np.sum(r * r, axis=1) + alpha * np.sum(np.abs(X) ** q, axis=1)


def tikhonov_grid_oracle(A, y, alpha, q, box=3.0, step=1e-2):
    """Exhaustive search on a lattice, then local refinement per support pattern.

    For every support pattern the restricted problem is smooth away from
    zero; the best lattice point with that pattern seeds a shrinking-box
    pattern search confined to the pattern.
    """
    n = A.shape[1]
    axis = np.arange(-box, box + step / 2, step)
    axis[np.argmin(np.abs(axis))] = 0.0
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)
    f = tikhonov_objective(A, y, alpha, q, X)
    best_x, best_f = None, np.inf
    patterns = X != 0
    for pat in itertools.product([False, True], repeat=n):
        mask = np.all(patterns == np.array(pat), axis=1)
        if not np.any(mask):
            continue
        idx = np.flatnonzero(mask)[np.argmin(f[mask])]
        x = X[idx].copy()
        fx = f[idx]
        h = step
        act = np.array(pat)
        while h > 1e-9:
            improved = False
            for k in np.flatnonzero(act):
                for s in (-h, h):
                    cand = x.copy()
                    cand[k] += s
                    if cand[k] == 0:
                        continue
                    fc = tikhonov_objective(A, y, alpha, q, cand[None, :])[0]
                    if fc < fx:
                        x, fx, improved = cand, fc, True
            if not improved:
                h /= 2
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f
