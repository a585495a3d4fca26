import math

import numpy as np
import pytest

from lqreg.basis import (
    Grid,
    GridFunction,
    OrthonormalBasis,
    analyze,
    cosine_eigenvalues,
    fourier_frequencies,
    frame_bounds,
    gram_schmidt,
    make_basis,
    make_canonical_basis,
    make_cosine_basis,
    make_fourier_basis,
    synthesize,
)
from lqreg.core import DimensionError

TOL = 1e-8


class TestGrid:
    @pytest.mark.parametrize("grid", [Grid.midpoint(37), Grid.periodic(64), Grid.midpoint(10, -1.0, 3.0)])
    def test_weights_sum_to_length(self, grid):
        assert abs(grid.weights.sum() - (grid.b - grid.a)) < 1e-12

    def test_midpoint_nodes(self):
        assert np.allclose(Grid.midpoint(4).nodes, [0.125, 0.375, 0.625, 0.875])

    def test_periodic_excludes_right_end(self):
        g = Grid.periodic(8)
        assert g.nodes[0] == 0.0 and g.nodes[-1] < 2 * math.pi

    def test_spec_round_trip(self):
        g = Grid.periodic(16)
        assert Grid.from_spec(g.spec()).same_as(g)

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            Grid(0.0, 1.0, [0.5, 0.2], [0.5, 0.5], "custom")

    def test_grid_function_length(self):
        with pytest.raises(DimensionError):
            GridFunction(Grid.midpoint(4), [1.0, 2.0])


class TestCosine:
    grid = Grid.midpoint(512)
    basis = make_cosine_basis(grid, 16)

    def test_value_at_zero(self):
        assert math.sqrt(2.0) * math.cos(0.5 * math.pi * 0.0) == math.sqrt(2.0)
        # closed-form row sampled near 0 approaches sqrt(2)
        assert abs(self.basis.samples[0, 0] - math.sqrt(2.0)) < 1e-5

    def test_dirichlet_at_one(self):
        k = np.arange(1, 17)
        assert np.max(np.abs(math.sqrt(2) * np.cos((k - 0.5) * math.pi * 1.0))) < 1e-14

    def test_neumann_at_zero(self):
        h = 1e-4
        k = np.arange(1, 17)
        row = lambda t: math.sqrt(2) * np.cos((k - 0.5) * math.pi * t)  # noqa: E731
        deriv = (row(h) - row(-h)) / (2 * h)
        assert np.max(np.abs(deriv)) < 1e-12

    def test_first_two_orthogonal(self):
        assert abs(self.grid.inner(self.basis.samples[0], self.basis.samples[1])) < TOL

    def test_gram(self):
        assert self.basis.orthonormality_error() < TOL

    def test_ratio_enforced(self):
        with pytest.raises(ValueError):
            make_cosine_basis(Grid.midpoint(64), 17)
        assert make_cosine_basis(Grid.midpoint(64), 17, strict=False).n_basis == 17

    def test_needs_unit_interval(self):
        with pytest.raises(ValueError):
            make_cosine_basis(Grid.midpoint(64, 0.0, 2.0), 4)

    def test_eigenvalues(self):
        assert np.allclose(cosine_eigenvalues(3), [0.5 * math.pi, 1.5 * math.pi, 2.5 * math.pi])

    def test_synthesize_first_unit(self):
        f = synthesize([1.0], self.basis)
        assert np.allclose(f.values, math.sqrt(2) * np.cos(math.pi * self.grid.nodes / 2), atol=1e-14)


class TestFourier:
    grid = Grid.periodic(512)
    basis = make_fourier_basis(grid, 9)

    def test_constant_row(self):
        assert np.allclose(self.basis.samples[0], 1 / math.sqrt(2 * math.pi))

    def test_cos_sin_orthogonal(self):
        assert abs(self.grid.inner(self.basis.samples[1], self.basis.samples[2])) < TOL

    def test_cos3_unit(self):
        assert abs(self.grid.norm(self.basis.samples[5]) ** 2 - 1.0) < TOL

    def test_ordering(self):
        t = self.grid.nodes
        assert np.allclose(self.basis.samples[3], np.cos(2 * t) / math.sqrt(math.pi))
        assert np.allclose(self.basis.samples[4], np.sin(2 * t) / math.sqrt(math.pi))
        assert list(fourier_frequencies(5)) == [0, 1, 1, 2, 2]

    def test_gram(self):
        assert self.basis.orthonormality_error() < TOL


class TestAnalysisSynthesis:
    grid = Grid.midpoint(256)
    basis = make_cosine_basis(grid, 32)

    def test_unit_coordinate(self):
        c = analyze(GridFunction(self.grid, self.basis.samples[1]), self.basis)
        assert np.max(np.abs(c - np.eye(32)[1])) < TOL

    def test_zero(self):
        assert np.all(analyze(GridFunction(self.grid, np.zeros(256)), self.basis) == 0)

    def test_linearity(self):
        f = GridFunction(self.grid, 3 * self.basis.samples[0] - self.basis.samples[3])
        expect = np.zeros(32)
        expect[[0, 3]] = [3, -1]
        assert np.max(np.abs(analyze(f, self.basis) - expect)) < TOL

    def test_round_trip_and_parseval(self, rng):
        for _ in range(20):
            c = rng.standard_normal(32)
            f = synthesize(c, self.basis)
            assert np.max(np.abs(analyze(f, self.basis) - c)) < TOL
            assert abs(f.norm() - np.linalg.norm(c)) < TOL

    def test_short_coefficients_padded(self):
        assert np.allclose(synthesize([1.0, 2.0], self.basis).values, self.basis.samples[0] + 2 * self.basis.samples[1])

    def test_too_many_coefficients(self):
        with pytest.raises(DimensionError):
            synthesize(np.ones(33), self.basis)

    def test_grid_mismatch(self):
        with pytest.raises(DimensionError):
            analyze(GridFunction(Grid.midpoint(128), np.ones(128)), self.basis)

    def test_duality(self, rng):
        for _ in range(20):
            c = rng.standard_normal(32)
            f = GridFunction(self.grid, rng.standard_normal(256))
            lhs = self.grid.inner(synthesize(c, self.basis).values, f.values)
            rhs = float(np.dot(c, analyze(f, self.basis)))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_canonical_coordinates(self, rng):
        grid = Grid.midpoint(20)
        basis = make_canonical_basis(grid)
        v = rng.standard_normal(20)
        c = analyze(GridFunction(grid, v), basis)
        assert np.allclose(c, np.sqrt(grid.weights) * v)
        assert basis.orthonormality_error() < 1e-12

    def test_make_basis_labels(self):
        assert make_basis("fourier-periodic", Grid.periodic(64), 5).label == "fourier-periodic"
        with pytest.raises(ValueError):
            make_basis("wavelet", self.grid, 4)


class TestGramSchmidt:
    grid = Grid.midpoint(2000)

    def test_monomials_give_legendre(self):
        t = self.grid.nodes
        b = gram_schmidt([np.ones_like(t), t, t * t], self.grid)
        assert np.max(np.abs(b.gram() - np.eye(3))) < 1e-10
        # orthonormal shifted Legendre polynomials on [0, 1]
        legendre = [
            np.ones_like(t),
            math.sqrt(3) * (2 * t - 1),
            math.sqrt(5) * (6 * t * t - 6 * t + 1),
        ]
        for row, ref in zip(b.samples, legendre):
            # the midpoint rule perturbs norms at O(h^2)
            assert np.max(np.abs(row - ref)) < 1e-5

    def test_orthonormal_input_unchanged(self):
        basis = make_cosine_basis(self.grid, 5)
        b = gram_schmidt(list(basis.samples), self.grid)
        signs = np.sign(np.sum(b.samples * basis.samples, axis=1))
        assert np.max(np.abs(b.samples * signs[:, None] - basis.samples)) < 1e-10

    def test_duplicate_dropped(self):
        t = self.grid.nodes
        b = gram_schmidt([np.ones_like(t), t, np.ones_like(t)], self.grid)
        assert b.n_basis == 2

    def test_empty(self):
        with pytest.raises(ValueError):
            gram_schmidt([], self.grid)

    def test_accepts_grid_functions(self):
        f = GridFunction.from_callable(self.grid, lambda t: t)
        assert gram_schmidt([f], self.grid).n_basis == 1


class TestFrameBounds:
    grid = Grid.midpoint(256)
    basis = make_cosine_basis(grid, 16)

    def test_orthonormal(self):
        lo, hi = frame_bounds(self.basis.samples, self.grid)
        assert abs(lo - 1) < 1e-8 and abs(hi - 1) < 1e-8

    def test_doubled(self):
        lo, hi = frame_bounds(np.vstack([self.basis.samples] * 2), self.grid)
        assert abs(lo - 2) < 1e-8 and abs(hi - 2) < 1e-8

    def test_scaled_row(self):
        rows = self.basis.samples.copy()
        rows[3] *= 2
        lo, hi = frame_bounds(rows, self.grid)
        assert abs(lo - 1) < 1e-8 and abs(hi - 4) < 1e-8

    def test_zero_family(self):
        with pytest.raises(ValueError):
            frame_bounds(np.zeros((2, 256)), self.grid)


def test_basis_spec_carries_label():
    b = OrthonormalBasis(Grid.midpoint(4), np.eye(4) * 2.0, "custom", {"note": 1})
    assert b.spec() == {"label": "custom", "n_basis": 4, "note": 1}
