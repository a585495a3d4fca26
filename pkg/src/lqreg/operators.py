"""Discretized forward operators, adjoints and Hilbert-scale norms.

Operators come in two representations:

``"grid"``
    The matrix maps grid values on ``domain`` (a :class:`~lqreg.basis.Grid`)
    to grid values on ``codomain``.  The adjoint folds in the quadrature
    weights, ``A* = W_dom^{-1} M^T W_cod``.

``"coefficient"``
    The matrix maps basis coefficients to isometric codomain coordinates, so
    the adjoint is the plain transpose.  The solver only ever sees this form;
    :func:`to_coefficients` converts a grid operator once at setup.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .basis import (
    Grid,
    GridFunction,
    OrthonormalBasis,
    analyze,
    cosine_eigenvalues,
    make_basis,
    make_canonical_basis,
)
from .core import DimensionError, as_sequence

__all__ = [
    "ForwardOperator",
    "HilbertScaleNorm",
    "make_abel",
    "make_nth_integral",
    "volterra_weights",
    "evaluate_at",
    "make_symm",
    "make_hegland",
    "make_diagonal",
    "to_coefficients",
    "apply",
    "apply_adjoint",
    "adjoint_matrix",
    "operator_norm",
    "smallest_singular_value",
    "hilbert_scale_norm",
    "isomorphism_band",
    "save_operator",
    "load_operator",
]


@dataclass(frozen=True, eq=False)
class ForwardOperator:
    """Dense matrix operator with its discretization metadata."""

    matrix: np.ndarray
    label: str
    representation: str
    domain: Grid | OrthonormalBasis | None = None
    codomain: Grid | None = None
    params: dict = field(default_factory=dict)
    spectral_data: dict | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, ndmin=2)
        if not np.all(np.isfinite(m)):
            raise ValueError("operator matrix has non-finite entries")
        if self.representation not in ("grid", "coefficient"):
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.representation == "grid":
            if not isinstance(self.domain, Grid) or not isinstance(self.codomain, Grid):
                raise ValueError("grid operators need domain and codomain grids")
            if m.shape != (self.codomain.n_points, self.domain.n_points):
                raise DimensionError("matrix shape does not match the grids")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def domain_weights(self) -> np.ndarray:
        if self.representation == "grid":
            return self.domain.weights
        return np.ones(self.shape[1])

    @property
    def codomain_weights(self) -> np.ndarray:
        if self.representation == "grid":
            return self.codomain.weights
        return np.ones(self.shape[0])

    def apply(self, x) -> np.ndarray:
        return apply(self, x)

    def apply_adjoint(self, y) -> np.ndarray:
        return apply_adjoint(self, y)


def _values(x) -> np.ndarray:
    if isinstance(x, GridFunction):
        return x.values
    return np.asarray(x, dtype=float)


def apply(op: ForwardOperator, x) -> np.ndarray:
    x = _values(x)
    if x.shape[0] != op.shape[1]:
        raise DimensionError(f"operator expects {op.shape[1]} inputs, got {x.shape[0]}")
    return op.matrix @ x


def apply_adjoint(op: ForwardOperator, y) -> np.ndarray:
    y = _values(y)
    if y.shape[0] != op.shape[0]:
        raise DimensionError(f"adjoint expects {op.shape[0]} inputs, got {y.shape[0]}")
    if op.representation == "coefficient":
        return op.matrix.T @ y
    wy = op.codomain_weights
    wx = op.domain_weights
    scaled = (wy * y.T).T if y.ndim > 1 else wy * y
    out = op.matrix.T @ scaled
    return (out.T / wx).T if out.ndim > 1 else out / wx


def adjoint_matrix(op: ForwardOperator) -> np.ndarray:
    if op.representation == "coefficient":
        return op.matrix.T.copy()
    return (op.matrix.T * op.codomain_weights[None, :]) / op.domain_weights[:, None]


# {{{ Volterra-type operators


def volterra_weights(
    exponent: float, grid: Grid, points, kernel=None, order: int = 0
) -> np.ndarray:
    """Product-integration rows for ``(1/Gamma(e)) int_0^s (s-t)^(e-1) K(s,t) x(t) dt``.

    Parameters
    ----------
    exponent : float
        ``e > 0``; ``e = nu`` for Abel operators and ``e = n`` for the
        ``n``-fold antiderivative.
    grid : Grid
        Midpoint grid on ``[0, 1]`` carrying the density samples.
    points : array_like
        Evaluation points ``s`` in ``[0, 1]``.
    kernel : callable, optional
        ``K(s, t)``, vectorized; sampled at the midpoint of each integration
        piece and multiplied into the exact singular weight.
    order : {0, 1}
        ``0`` treats ``x`` as piecewise constant on the cells.  ``1`` uses the
        piecewise-linear interpolant through the midpoints (linearly
        extrapolated to the ends, causally) and is exact for linear ``x``.
    """
    if grid.rule != "midpoint":
        raise ValueError("Volterra operators are discretized on midpoint grids")
    s = np.atleast_1d(np.asarray(points, dtype=float))
    e = float(exponent)
    g1 = float(gamma_fn(e + 1.0))
    n = grid.n_points
    rows = np.zeros((s.size, n))

    def mass(sv, lo, hi, power):
        # int_lo^hi (s - t)^(power - 1) dt  with  lo <= hi <= s
        return ((sv - lo) ** power - (sv - hi) ** power) / power

    if order == 0:
        edges = grid.cell_edges
        lo = edges[:-1][None, :]
        hi = edges[1:][None, :]
        sv = s[:, None]
        top = np.minimum(hi, sv)
        active = lo < sv
        lo_c = np.where(active, lo, 0.0)
        top_c = np.where(active, top, 0.0)
        sc = np.where(active, sv, 1.0)
        w = np.where(active, ((sc - lo_c) ** e - (sc - top_c) ** e) / g1, 0.0)
        if kernel is not None:
            mid = 0.5 * (lo_c + top_c)
            w = w * np.where(active, kernel(np.broadcast_to(sv, w.shape), mid), 0.0)
        return w

    if order != 1:
        raise ValueError("order must be 0 or 1")
    if n < 2:
        raise ValueError("piecewise-linear product integration needs two nodes")
    m = grid.nodes
    h = grid.spacing
    ge = float(gamma_fn(e))
    # pieces: [a, m_0] uses nodes (0, 1); [m_j, m_{j+1}] uses (j, j+1); [m_{n-1}, b] uses (n-2, n-1)
    breaks = np.concatenate(([grid.a], m, [grid.b]))
    left_node = np.concatenate(([0], np.arange(n - 1), [n - 2]))
    for i, sv in enumerate(s):
        for piece in range(n + 1):
            lo = breaks[piece]
            if lo >= sv:
                break
            hi = min(breaks[piece + 1], sv)
            if hi <= lo:
                continue
            j = left_node[piece]
            i0 = mass(sv, lo, hi, e)
            if piece == 0 and sv < m[1]:
                # before x_1 is available: constant extrapolation keeps causality
                kfac = kernel(sv, 0.5 * (lo + hi)) if kernel is not None else 1.0
                rows[i, 0] += kfac * i0 / ge
                continue
            i1 = (sv - m[j]) * i0 - mass(sv, lo, hi, e + 1.0)
            kfac = kernel(sv, 0.5 * (lo + hi)) if kernel is not None else 1.0
            rows[i, j] += kfac * (i0 - i1 / h) / ge
            rows[i, j + 1] += kfac * (i1 / h) / ge
    return rows


def _volterra(label, exponent, grid, kernel, order, params) -> ForwardOperator:
    mat = volterra_weights(exponent, grid, grid.nodes, kernel=kernel, order=order)
    return ForwardOperator(
        mat, label, "grid", grid, grid, params={**params, "order": order}
    )


def make_abel(nu: float, grid: Grid, kernel=None, order: int = 0) -> ForwardOperator:
    """Abel-type operator ``(1/Gamma(nu)) int_0^s (s-t)^(nu-1) K(s,t) x(t) dt``.

    Collocated at the grid midpoints; ``nu`` must lie in ``(0, 1]``.
    """
    if not 0.0 < nu <= 1.0:
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    return _volterra("abel", nu, grid, kernel, order, {"nu": float(nu), "kernel": kernel})


def make_nth_integral(n: int, grid: Grid, order: int = 1) -> ForwardOperator:
    """``n``-fold antiderivative ``(1/Gamma(n)) int_0^s (s-t)^(n-1) x(t) dt``."""
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    return _volterra("nth-integral", int(n), grid, None, order, {"n": int(n), "kernel": None})


def evaluate_at(op: ForwardOperator, x, points) -> np.ndarray:
    """Evaluate ``[Ax](s)`` of a Volterra operator at arbitrary ``s``."""
    if op.label not in ("abel", "nth-integral"):
        raise ValueError("point evaluation is only defined for Volterra operators")
    e = op.params["nu"] if op.label == "abel" else op.params["n"]
    rows = volterra_weights(
        e, op.domain, points, kernel=op.params.get("kernel"), order=op.params["order"]
    )
    return rows @ _values(x)


# }}}


def make_symm(radius: float, grid: Grid) -> ForwardOperator:
    """Symm's single-layer operator on a circle of radius ``radius``.

    ``[Ax](t) = -(1/pi) int_0^{2pi} x(tau) log|gamma(t) - gamma(tau)| dtau``
    with ``log|gamma(t) - gamma(tau)| = log(radius) + log(2|sin((t-tau)/2)|)``.
    The logarithmic part is integrated exactly against the trigonometric
    interpolant of the samples; the constant part uses the trapezoid rule.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if radius == 1.0:
        raise ValueError("radius 1 annihilates constants; choose radius != 1")
    if grid.rule != "periodic-trapezoid":
        raise ValueError("Symm's operator needs a periodic grid")
    npts = grid.n_points
    if npts % 2:
        raise ValueError("Symm quadrature needs an even number of points")
    half = npts // 2
    t = grid.nodes
    diff = t[:, None] - t[None, :]
    log_w = np.zeros_like(diff)
    for m in range(1, half):
        log_w += np.cos(m * diff) / m
    log_w += np.cos(half * diff) / (2 * half)
    log_w *= -math.pi / half
    mat = -(1.0 / math.pi) * (math.log(radius) * grid.weights[None, :] + log_w)
    spectral = {
        "frequencies": np.arange(half + 1),
        "eigenvalues": np.concatenate(
            ([-2.0 * math.log(radius)], 1.0 / np.arange(1, half + 1))
        ),
    }
    return ForwardOperator(
        mat, "symm", "grid", grid, grid, params={"radius": float(radius)}, spectral_data=spectral
    )


def make_hegland(n_basis: int) -> ForwardOperator:
    """Bidiagonal ``A u_1 = u_1``, ``A u_k = u_k/k - u_{k-1}/(k-1)``."""
    if n_basis < 2:
        raise ValueError("n_basis must be >= 2")
    mat = np.zeros((n_basis, n_basis))
    mat[0, 0] = 1.0
    k = np.arange(2, n_basis + 1)
    mat[k - 1, k - 1] = 1.0 / k
    mat[k - 2, k - 1] = -1.0 / (k - 1)
    return ForwardOperator(mat, "hegland", "coefficient", params={"n_basis": n_basis})


def make_diagonal(decay: float, n_basis: int) -> ForwardOperator:
    """Diagonal operator ``A e_k = k^(-decay) e_k``."""
    if decay <= 0:
        raise ValueError("decay must be positive")
    sv = np.arange(1, n_basis + 1, dtype=float) ** (-float(decay))
    return ForwardOperator(
        np.diag(sv),
        "diagonal",
        "coefficient",
        params={"decay": float(decay), "n_basis": n_basis},
        spectral_data={"singular_values": sv},
    )


def to_coefficients(
    op: ForwardOperator, basis: OrthonormalBasis, codomain_basis: OrthonormalBasis | None = None
) -> ForwardOperator:
    """Conjugate a grid operator with synthesis on ``basis``.

    The codomain defaults to the canonical basis of the codomain grid, which
    gives isometric coordinates ``sqrt(w_m) y_m``.
    """
    if op.representation != "grid":
        raise ValueError("operator is already in coefficient representation")
    if not basis.grid.same_as(op.domain):
        raise DimensionError("basis grid does not match the operator domain")
    cod = codomain_basis if codomain_basis is not None else make_canonical_basis(op.codomain)
    mat = (cod.samples * cod.grid.weights) @ op.matrix @ basis.samples.T
    return ForwardOperator(
        mat,
        op.label,
        "coefficient",
        basis,
        op.codomain,
        params={**op.params, "codomain_basis": cod.label},
        spectral_data=op.spectral_data,
    )


def operator_norm(op: ForwardOperator, n_iter: int = 500, tol: float = 1e-13, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``A* A``."""
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    wx = op.domain_weights
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(op.shape[1])
    v /= math.sqrt(np.dot(wx * v, v))
    lam = 0.0
    for _ in range(n_iter):
        u = apply_adjoint(op, apply(op, v))
        nrm = math.sqrt(np.dot(wx * u, u))
        if nrm == 0.0:
            return 0.0
        new = float(np.dot(wx * v, u))
        v = u / nrm
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        lam = new
    return math.sqrt(max(lam, 0.0))


def _unitary_matrix(op: ForwardOperator) -> np.ndarray:
    if op.representation == "coefficient":
        return op.matrix
    return np.sqrt(op.codomain_weights)[:, None] * op.matrix / np.sqrt(op.domain_weights)[None, :]


def smallest_singular_value(op: ForwardOperator) -> float:
    """Smallest singular value (discrete injectivity diagnostic)."""
    return float(np.linalg.svd(_unitary_matrix(op), compute_uv=False)[-1])


@dataclass(frozen=True, eq=False)
class HilbertScaleNorm:
    """Spectral Hilbert scale ``||x||_nu^2 = sum_k mu_k^(2 nu) <x, w_k>^2``."""

    nu: float
    eigenvalues: np.ndarray
    eigen_basis: OrthonormalBasis | None = None

    def __post_init__(self):
        mu = as_sequence(self.eigenvalues, "eigenvalues")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if np.any(mu <= 0) or np.any(np.diff(mu) <= 0):
            raise ValueError("eigenvalues must be positive and strictly increasing")
        object.__setattr__(self, "eigenvalues", mu)

    @classmethod
    def cosine(cls, nu: float, basis: OrthonormalBasis | None = None, n: int | None = None):
        """Scale generated by ``B^2 w = -w''`` with ``w'(0) = w(1) = 0``."""
        size = basis.n_basis if basis is not None else n
        return cls(nu, cosine_eigenvalues(size), basis)


def hilbert_scale_norm(x, hs: HilbertScaleNorm, sign: int = -1) -> float:
    """``(sum_k mu_k^(+-2 nu) <x, w_k>^2)^(1/2)``; ``sign=-1`` gives ``X_{-nu}``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if isinstance(x, GridFunction):
        if hs.eigen_basis is None:
            raise ValueError("grid functions need a scale with an eigen basis")
        c = analyze(x, hs.eigen_basis)
    else:
        c = as_sequence(x)
    if c.size > hs.eigenvalues.size:
        raise DimensionError("eigen basis does not cover the resolution of x")
    mu = hs.eigenvalues[: c.size]
    return math.sqrt(math.fsum(mu ** (2 * sign * hs.nu) * c * c))


def isomorphism_band(
    op: ForwardOperator,
    hs: HilbertScaleNorm,
    nu: float | None = None,
    n_trials: int = 200,
    seed: int = 0,
) -> tuple[float, float]:
    """Extremes of ``||Ax|| / ||x||_{-nu}`` over a battery of trial vectors.

    ``op`` must be in coefficient representation with respect to the eigen
    basis of ``hs`` (or an abstract basis for coefficient-only operators).
    The battery holds ``n_trials`` random vectors, every eigen direction and
    the extremal singular directions of ``A D^nu``, ``D = diag(mu)``.
    """
    if op.representation != "coefficient":
        raise ValueError("isomorphism_band expects a coefficient-representation operator")
    nu = hs.nu if nu is None else float(nu)
    n = op.shape[1]
    if hs.eigenvalues.size < n:
        raise DimensionError("scale has fewer eigenvalues than the operator domain")
    mu = hs.eigenvalues[:n]
    rng = np.random.Generator(np.random.Philox(seed))
    trials = [np.eye(n)]
    if n_trials > 0:
        trials.append(rng.standard_normal((n, n_trials)))
    scaled = op.matrix * mu[None, :] ** nu
    _, _, vt = np.linalg.svd(scaled, full_matrices=False)
    trials.append((mu[:, None] ** nu) * vt[[0, -1]].T)
    xs = np.hstack(trials)
    num = np.linalg.norm(op.matrix @ xs, axis=0)
    den = np.sqrt(np.sum((mu[:, None] ** (-2 * nu)) * xs * xs, axis=0))
    keep = den > 0
    ratio = num[keep] / den[keep]
    return float(ratio.min()), float(ratio.max())


# {{{ serialization

_FORMAT = "lqreg-operator/1"


def _domain_header(dom):
    if dom is None:
        return {"kind": "none"}
    if isinstance(dom, Grid):
        return {"kind": "grid", "grid": dom.spec()}
    return {"kind": "basis", "grid": dom.grid.spec(), "basis": dom.spec()}


def save_operator(op: ForwardOperator, path) -> None:
    """Write ``op`` as ``.npz``: the matrix plus a JSON header.

    Header fields: ``format``, ``label``, ``representation``, ``shape``,
    ``params`` (JSON-representable entries only), ``domain`` and
    ``codomain`` descriptors with their grid specs.  Basis samples are stored
    alongside in ``domain_samples`` so non-standard bases round-trip.
    """
    params = {}
    for key, val in op.params.items():
        try:
            json.dumps(val)
        except TypeError:
            continue
        params[key] = val
    header = {
        "format": _FORMAT,
        "label": op.label,
        "representation": op.representation,
        "shape": list(op.shape),
        "params": params,
        "domain": _domain_header(op.domain),
        "codomain": _domain_header(op.codomain),
    }
    arrays = {"matrix": op.matrix, "header": np.array(json.dumps(header, sort_keys=True))}
    if isinstance(op.domain, OrthonormalBasis):
        arrays["domain_samples"] = op.domain.samples
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def _domain_from(desc, samples):
    if desc["kind"] == "none":
        return None
    grid = Grid.from_spec(desc["grid"])
    if desc["kind"] == "grid":
        return grid
    return OrthonormalBasis(grid, samples, desc["basis"]["label"])


def load_operator(path) -> ForwardOperator:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != _FORMAT:
            raise ValueError(f"unsupported operator file format {header.get('format')!r}")
        samples = data["domain_samples"] if "domain_samples" in data else None
        return ForwardOperator(
            data["matrix"],
            header["label"],
            header["representation"],
            _domain_from(header["domain"], samples),
            _domain_from(header["codomain"], None),
            params=header["params"],
        )


# }}}


def build_operator(spec: dict, grid: Grid | None = None) -> ForwardOperator:
    """Construct an operator from a ``{"label": ..., **params}`` mapping."""
    label = spec["label"]
    if label == "diagonal":
        return make_diagonal(spec.get("decay", 1.0), spec["n_basis"])
    if label == "hegland":
        return make_hegland(spec["n_basis"])
    if grid is None:
        raise ValueError(f"operator {label!r} needs a grid")
    if label == "abel":
        return make_abel(spec.get("nu", 0.5), grid, order=spec.get("order", 0))
    if label == "nth-integral":
        return make_nth_integral(spec.get("n", 2), grid, order=spec.get("order", 1))
    if label == "symm":
        return make_symm(spec.get("radius", 0.5), grid)
    raise ValueError(f"unknown operator label {label!r}")


def default_grid_and_basis(label: str, n_points: int, n_basis: int):
    """Standard discretization for each grid operator."""
    if label == "symm":
        grid = Grid.periodic(n_points)
        return grid, make_basis("fourier-periodic", grid, n_basis)
    grid = Grid.midpoint(n_points)
    return grid, make_basis("cosine-neumann-dirichlet", grid, n_basis)
