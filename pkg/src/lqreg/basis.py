"""Orthonormal bases on 1-D grids and the analysis/synthesis maps.

A :class:`Grid` carries the quadrature rule that defines the discrete
``L^2`` inner product ``<f, g> = sum_m w_m f_m g_m``.  Bases are stored
as sampled rows; ``analyze`` and ``synthesize`` are adjoint to each other
with respect to this inner product and the Euclidean product on
coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DimensionError, as_sequence

__all__ = [
    "Grid",
    "GridFunction",
    "OrthonormalBasis",
    "BASIS_LABELS",
    "make_basis",
    "make_cosine_basis",
    "make_fourier_basis",
    "make_canonical_basis",
    "analyze",
    "synthesize",
    "gram_schmidt",
    "frame_bounds",
]

BASIS_LABELS = ("cosine-neumann-dirichlet", "fourier-periodic", "canonical")


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature grid on ``[a, b]``.

    Use :meth:`midpoint` for ``[0, 1]`` problems and :meth:`periodic` for
    ``[0, 2 pi)``.
    """

    a: float
    b: float
    nodes: np.ndarray
    weights: np.ndarray
    rule: str

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise DimensionError("nodes and weights must be equal-length 1-D arrays")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if nodes[0] < self.a or nodes[-1] > self.b:
            raise ValueError("nodes must lie in [a, b]")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def midpoint(cls, n_points: int, a: float = 0.0, b: float = 1.0) -> "Grid":
        h = (b - a) / n_points
        nodes = a + (np.arange(n_points) + 0.5) * h
        return cls(a, b, nodes, np.full(n_points, h), "midpoint")

    @classmethod
    def periodic(cls, n_points: int, a: float = 0.0, b: float = 2 * math.pi) -> "Grid":
        h = (b - a) / n_points
        nodes = a + np.arange(n_points) * h
        return cls(a, b, nodes, np.full(n_points, h), "periodic-trapezoid")

    @property
    def n_points(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        return (self.b - self.a) / self.n_points

    @property
    def cell_edges(self) -> np.ndarray:
        """Cell boundaries for the midpoint rule."""
        return self.a + np.arange(self.n_points + 1) * self.spacing

    def inner(self, f, g) -> float:
        return float(np.dot(self.weights * np.asarray(f, float), np.asarray(g, float)))

    def norm(self, f) -> float:
        return math.sqrt(max(self.inner(f, f), 0.0))

    def same_as(self, other: "Grid") -> bool:
        return (
            self is other
            or (
                self.rule == other.rule
                and self.n_points == other.n_points
                and self.a == other.a
                and self.b == other.b
            )
        )

    def spec(self) -> dict:
        return {"rule": self.rule, "a": self.a, "b": self.b, "n_points": self.n_points}

    @classmethod
    def from_spec(cls, spec: dict) -> "Grid":
        if spec["rule"] == "midpoint":
            return cls.midpoint(spec["n_points"], spec["a"], spec["b"])
        if spec["rule"] == "periodic-trapezoid":
            return cls.periodic(spec["n_points"], spec["a"], spec["b"])
        raise ValueError(f"unknown grid rule {spec['rule']!r}")


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = as_sequence(self.values, "values")
        if v.size != self.grid.n_points:
            raise DimensionError(
                f"grid has {self.grid.n_points} nodes, got {v.size} values"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        return cls(grid, np.broadcast_to(fn(grid.nodes), grid.nodes.shape))

    def norm(self) -> float:
        return self.grid.norm(self.values)


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Basis functions sampled on a grid; row ``k`` holds ``u_{k+1}``."""

    grid: Grid
    samples: np.ndarray
    label: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float, ndmin=2)
        if s.shape[1] != self.grid.n_points:
            raise DimensionError("sample rows must match the grid")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n_basis(self) -> int:
        return self.samples.shape[0]

    def gram(self) -> np.ndarray:
        return (self.samples * self.grid.weights) @ self.samples.T

    def orthonormality_error(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(self.n_basis))))

    def spec(self) -> dict:
        return {"label": self.label, "n_basis": self.n_basis, **self.params}


def _check_ratio(grid: Grid, n_basis: int, strict: bool):
    if n_basis < 1:
        raise ValueError("n_basis must be positive")
    if strict and 4 * n_basis > grid.n_points:
        raise ValueError(
            f"n_basis={n_basis} exceeds n_points/4 for a {grid.n_points}-point grid"
        )


def make_cosine_basis(grid: Grid, n_basis: int, strict: bool = True) -> OrthonormalBasis:
    """Rows ``sqrt(2) cos((k - 1/2) pi t)`` on ``[0, 1]``.

    These are the eigenfunctions of ``w'' `` with ``w'(0) = w(1) = 0``.
    """
    if grid.a != 0.0 or grid.b != 1.0:
        raise ValueError("cosine basis requires a grid on [0, 1]")
    _check_ratio(grid, n_basis, strict)
    k = np.arange(1, n_basis + 1)[:, None]
    rows = math.sqrt(2.0) * np.cos((k - 0.5) * math.pi * grid.nodes[None, :])
    return OrthonormalBasis(grid, rows, "cosine-neumann-dirichlet")


def cosine_eigenvalues(n_basis: int) -> np.ndarray:
    """Eigenvalues ``(k - 1/2) pi`` matching :func:`make_cosine_basis`."""
    return (np.arange(1, n_basis + 1) - 0.5) * math.pi


def make_fourier_basis(grid: Grid, n_basis: int, strict: bool = True) -> OrthonormalBasis:
    """Real trigonometric basis on ``[0, 2 pi)``.

    Ordering is ``1/sqrt(2 pi), cos t/sqrt(pi), sin t/sqrt(pi), cos 2t/sqrt(pi), ...``.
    """
    if grid.a != 0.0 or not math.isclose(grid.b, 2 * math.pi):
        raise ValueError("Fourier basis requires a grid on [0, 2 pi)")
    _check_ratio(grid, n_basis, strict)
    t = grid.nodes
    rows = [np.full(t.shape, 1.0 / math.sqrt(2 * math.pi))]
    m = 1
    while len(rows) < n_basis:
        rows.append(np.cos(m * t) / math.sqrt(math.pi))
        if len(rows) < n_basis:
            rows.append(np.sin(m * t) / math.sqrt(math.pi))
        m += 1
    return OrthonormalBasis(grid, np.array(rows), "fourier-periodic")


def fourier_frequencies(n_basis: int) -> np.ndarray:
    """Frequency of each row of :func:`make_fourier_basis`."""
    return (np.arange(n_basis) + 1) // 2


def make_canonical_basis(grid: Grid) -> OrthonormalBasis:
    """Normalized point masses ``delta_m / sqrt(w_m)``.

    Coefficients in this basis are the grid values scaled by ``sqrt(w_m)``,
    i.e. isometric coordinates for the discrete ``L^2`` space.
    """
    return OrthonormalBasis(grid, np.diag(1.0 / np.sqrt(grid.weights)), "canonical")


def make_basis(label: str, grid: Grid, n_basis: int | None = None, strict: bool = True):
    if label == "cosine-neumann-dirichlet":
        return make_cosine_basis(grid, n_basis, strict)
    if label == "fourier-periodic":
        return make_fourier_basis(grid, n_basis, strict)
    if label == "canonical":
        return make_canonical_basis(grid)
    raise ValueError(f"unknown basis label {label!r}; expected one of {BASIS_LABELS}")


def analyze(f: GridFunction, basis: OrthonormalBasis) -> np.ndarray:
    """Coefficients ``<f, u_k>`` in the discrete inner product."""
    if not f.grid.same_as(basis.grid):
        raise DimensionError("grid function and basis live on different grids")
    return basis.samples @ (basis.grid.weights * f.values)


def synthesize(c, basis: OrthonormalBasis) -> GridFunction:
    """Grid function ``sum_k c_k u_k``; shorter ``c`` is zero-padded."""
    c = as_sequence(c, "c")
    if c.size > basis.n_basis:
        raise DimensionError(f"{c.size} coefficients for a basis of size {basis.n_basis}")
    return GridFunction(basis.grid, c @ basis.samples[: c.size])


def gram_schmidt(family, grid: Grid, drop_tol: float = 1e-10) -> OrthonormalBasis:
    """Orthonormalize ``family`` in the discrete inner product of ``grid``.

    Modified Gram-Schmidt with one reorthogonalization pass.  A member whose
    residual norm falls below ``drop_tol`` times its original norm is
    discarded.
    """
    vecs = [np.asarray(f.values if isinstance(f, GridFunction) else f, float) for f in family]
    if not vecs:
        raise ValueError("empty family")
    w = grid.weights
    out: list[np.ndarray] = []
    for v in vecs:
        if v.shape != (grid.n_points,):
            raise DimensionError("family member does not match the grid")
        nrm0 = math.sqrt(float(np.dot(w * v, v)))
        r = v.copy()
        for _ in range(2):
            for u in out:
                r -= np.dot(w * u, r) * u
        nrm = math.sqrt(float(np.dot(w * r, r)))
        if nrm0 == 0.0 or nrm <= drop_tol * nrm0:
            continue
        out.append(r / nrm)
    if not out:
        raise ValueError("family spans only the zero function")
    return OrthonormalBasis(grid, np.array(out), "gram-schmidt")


def frame_bounds(rows, grid: Grid, rank_tol: float = 1e-10) -> tuple[float, float]:
    """Frame bounds of a family on the span it generates.

    The frame operator ``S f = sum_k <f, u_k> u_k`` shares its nonzero
    spectrum with the Gram matrix ``G_jk = <u_j, u_k>``, so the bounds are
    the extreme nonzero eigenvalues of ``G``.
    """
    mat = np.array(
        [r.values if isinstance(r, GridFunction) else r for r in rows], dtype=float, ndmin=2
    )
    if mat.size == 0:
        raise ValueError("empty family")
    gram = (mat * grid.weights) @ mat.T
    ev = np.linalg.eigvalsh(gram)
    top = ev[-1]
    if top <= 0:
        raise ValueError("family spans only the zero function")
    nz = ev[ev > rank_tol * top]
    return float(nz[0]), float(nz[-1])
