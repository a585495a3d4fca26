import math

import numpy as np
import pytest

from lqreg.core import DimensionError, PenaltyConfig, penalty_eval
from lqreg.operators import ForwardOperator, make_abel, make_diagonal
from lqreg.basis import Grid
from lqreg.solver import (
    SolverOptions,
    TikhonovProblem,
    objective_eval,
    prox,
    prox_scalar,
    prox_threshold,
    solve,
)

from oracles import scalar_grid_oracle, scalar_objective, tikhonov_grid_oracle

# larger root of z + 0.5 z^(-1/2) = 3, checked against a 40-digit mpmath solve
GOLDEN_HALF_3 = 2.695453151015772
# larger root of z + 0.25 z^(-1/2) = 3
GOLDEN_HALF_3_LAM_HALF = 2.851963773464224


def mat_op(m):
    return ForwardOperator(np.atleast_2d(np.asarray(m, float)), "matrix", "coefficient")


class TestProx:
    def test_soft(self):
        assert prox_scalar(2.5, 1.0, 1.0) == 1.5

    def test_soft_zero(self):
        assert prox_scalar(0.5, 1.0, 1.0) == 0.0

    def test_half_golden(self):
        z = prox_scalar(3.0, 1.0, 0.5)
        assert 2 < z < 3 and z == pytest.approx(GOLDEN_HALF_3, abs=1e-14)
        assert scalar_objective(z, 3.0, 1.0, 0.5) < scalar_objective(0.0, 3.0, 1.0, 0.5) == 4.5

    def test_half_zero_branch(self):
        assert prox_scalar(0.5, 1.0, 0.5) == 0.0

    def test_sign_symmetry(self):
        v = np.linspace(-4, 4, 81)
        for q in (1.0, 0.5, 0.3):
            assert np.array_equal(prox(-v, 0.7, q), -prox(v, 0.7, q))

    @pytest.mark.parametrize("q", [1.0, 0.5, 2 / 3, 0.3, 0.9])
    def test_threshold_tie_goes_to_zero(self, q):
        lam = 0.8
        t = float(prox_threshold(lam, q))
        assert prox_scalar(t, lam, q) == 0.0
        assert prox_scalar(t * (1 + 1e-6), lam, q) != 0.0

    def test_threshold_half_closed_form(self):
        # (3/2) lam^(2/3) for q = 1/2
        assert prox_threshold(1.0, 0.5) == pytest.approx(1.5, rel=1e-14)

    @pytest.mark.parametrize("q", [1.0, 0.5, 0.75, 0.2])
    def test_against_grid_oracle(self, q):
        for v in (-3.7, -1.1, 0.4, 1.9, 4.2):
            for lam in (0.1, 0.9, 2.0):
                z = prox_scalar(v, lam, q)
                zo, fo = scalar_grid_oracle(v, lam, q, lo=-5, hi=5, step=1e-4)
                assert scalar_objective(z, v, lam, q) <= fo + 1e-12
                assert abs(z - zo) < 2e-4

    def test_newton_root_is_stationary(self):
        v, lam, q = np.array([2.0, 3.5, 5.0]), np.array([0.3, 1.0, 0.2]), 0.37
        z = prox(v, lam, q)
        assert np.all(z > 0)
        assert np.max(np.abs(z - v + lam * q * z ** (q - 1))) < 1e-12

    def test_rejects(self):
        with pytest.raises(ValueError):
            prox_scalar(1.0, 0.0, 0.5)
        with pytest.raises(ValueError):
            prox_scalar(1.0, 1.0, 1.5)


class TestProblem:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            TikhonovProblem(mat_op(np.eye(2)), [1.0, math.inf], 0.0, PenaltyConfig.uniform(1, 2), 1.0)

    @pytest.mark.parametrize("alpha", [0.0, -1.0])
    def test_rejects_alpha(self, alpha):
        with pytest.raises(ValueError):
            TikhonovProblem(mat_op(np.eye(2)), [1.0, 2.0], 0.0, PenaltyConfig.uniform(1, 2), alpha)

    def test_rejects_p(self):
        with pytest.raises(ValueError):
            TikhonovProblem(mat_op(np.eye(2)), [1.0, 2.0], 0.0, PenaltyConfig.uniform(1, 2), 1.0, p=3)

    def test_rejects_grid_operator(self):
        op = make_abel(0.5, Grid.midpoint(8))
        with pytest.raises(ValueError):
            TikhonovProblem(op, np.ones(8), 0.0, PenaltyConfig.uniform(1, 8), 1.0)

    def test_rejects_shape(self):
        with pytest.raises(DimensionError):
            TikhonovProblem(mat_op(np.eye(2)), [1.0], 0.0, PenaltyConfig.uniform(1, 2), 1.0)

    def test_with_alpha(self):
        p = TikhonovProblem(mat_op(np.eye(2)), [1.0, 2.0], 0.0, PenaltyConfig.uniform(1, 2), 1.0)
        assert p.with_alpha(0.25).alpha == 0.25


class TestObjective:
    prob = TikhonovProblem(mat_op([[1.0, 2.0], [0.0, 1.0]]), [1.0, -2.0], 0.1, PenaltyConfig.uniform(0.5, 2), 0.3)

    def test_zero(self):
        assert objective_eval(self.prob, [0.0, 0.0]) == 0.5 * 5.0

    def test_small_alpha_limit(self):
        x = np.array([0.3, -0.7])
        r = self.prob.op.matrix @ x - self.prob.y_delta
        assert objective_eval(self.prob.with_alpha(1e-14), x) == pytest.approx(0.5 * r @ r, abs=1e-13)

    def test_dimension(self):
        with pytest.raises(DimensionError):
            objective_eval(self.prob, [1.0])


class TestSolveExamples:
    def test_zero_data(self):
        for q in (1.0, 0.5):
            prob = TikhonovProblem(mat_op(np.eye(3) + 0.2), np.zeros(3), 0.0, PenaltyConfig.uniform(q, 3), 0.7)
            res = solve(prob)
            assert np.all(res.x == 0) and res.objective == 0.0

    def test_scalar_soft(self):
        res = solve(TikhonovProblem(mat_op([[1.0]]), [3.0], 0.0, PenaltyConfig.uniform(1.0, 1), 1.0))
        assert res.x[0] == 2.0

    @pytest.mark.parametrize("mode", ["auto", "never"])
    def test_separable_half(self, mode):
        prob = TikhonovProblem(mat_op(np.eye(2)), [3.0, 0.1], 0.0, PenaltyConfig.uniform(0.5, 2), 0.5)
        res = solve(prob, separable=mode)
        assert res.x[0] == pytest.approx(GOLDEN_HALF_3_LAM_HALF, abs=1e-9)
        assert res.x[1] == 0.0
        assert res.support == (1,)

    def test_objective_recomputes(self, rng):
        A = rng.standard_normal((6, 4))
        prob = TikhonovProblem(mat_op(A), rng.standard_normal(6), 0.1, PenaltyConfig.uniform(0.5, 4), 0.2)
        res = solve(prob)
        assert abs(res.objective - objective_eval(prob, res.x)) < 1e-10
        assert abs(res.objective - (0.5 * res.discrepancy**2 + 0.2 * penalty_eval(res.x, prob.penalty))) < 1e-10

    def test_separable_always_needs_orthogonal_columns(self, rng):
        prob = TikhonovProblem(mat_op(rng.standard_normal((3, 3))), np.ones(3), 0.0, PenaltyConfig.uniform(1, 3), 1.0)
        with pytest.raises(ValueError):
            solve(prob, separable="always")

    def test_separable_matches_iterative(self, rng):
        A = np.diag([1.0, 0.5, 0.25, 0.125])
        y = rng.standard_normal(4)
        for q in (1.0, 0.5):
            prob = TikhonovProblem(mat_op(A), y, 0.0, PenaltyConfig.uniform(q, 4), 0.05)
            exact = solve(prob)
            it = solve(prob, separable="never", rel_tol=1e-14, max_iter=200000)
            assert it.objective >= exact.objective - 1e-12
            assert it.objective <= exact.objective + 1e-9

    def test_separable_with_zero_column(self):
        A = np.zeros((3, 2))
        A[0, 0] = 2.0
        prob = TikhonovProblem(mat_op(A), [4.0, 1.0, 1.0], 0.0, PenaltyConfig.uniform(1.0, 2), 1.0)
        res = solve(prob)
        assert res.x[1] == 0.0 and res.x[0] == pytest.approx(1.75)


class TestIterations:
    def _prob(self, rng, q, n=8):
        A = rng.standard_normal((10, n)) / 3
        return TikhonovProblem(mat_op(A), rng.standard_normal(10), 0.1, PenaltyConfig.uniform(q, n), 0.1)

    @pytest.mark.parametrize("q", [1.0, 0.5, 0.3])
    @pytest.mark.parametrize("accelerate", [False, True])
    def test_monotone_descent(self, rng, q, accelerate):
        prob = self._prob(rng, q)
        res = solve(prob, keep_history=True, restarts=0, accelerate=accelerate, max_iter=3000)
        h = np.array(res.history)
        assert np.all(np.diff(h) <= 1e-12 * np.maximum(1.0, np.abs(h[:-1])))

    @pytest.mark.parametrize("q", [1.0, 0.5])
    def test_fixed_point(self, rng, q):
        prob = self._prob(rng, q)
        tol = 1e-10
        res = solve(prob, rel_tol=tol, max_iter=200000)
        assert res.converged and np.linalg.norm(res.x) < 10
        A, y = prob.op.matrix, prob.y_delta
        step = 1.0 / (1.01 * np.linalg.norm(A, 2)) ** 2
        nxt = prox(res.x - step * A.T @ (A @ res.x - y), step * prob.alpha, q)
        assert np.linalg.norm(nxt - res.x) < 10 * tol

    def test_result_is_exactly_sparse(self, rng):
        prob = self._prob(rng, 0.5)
        res = solve(prob.with_alpha(0.5))
        assert len(res.support) < prob.n
        assert np.count_nonzero(res.x) == len(res.support)

    def test_multistart_never_worse_than_single(self, rng):
        for _ in range(5):
            prob = self._prob(rng, 0.3)
            single = solve(prob, restarts=0)
            multi = solve(prob, restarts=5)
            assert multi.objective <= single.objective

    def test_deterministic(self, rng):
        prob = self._prob(rng, 0.5)
        a, b = solve(prob, seed=3), solve(prob, seed=3)
        assert np.array_equal(a.x, b.x) and a.iterations == b.iterations

    def test_warm_start_length(self, rng):
        with pytest.raises(DimensionError):
            solve(self._prob(rng, 1.0), x0=np.zeros(3))


def test_sparsity_statistics():
    n = 100
    op = make_diagonal(1.0, n)
    xdag = np.arange(1, n + 1) ** -2.0
    y = op.matrix @ xdag
    hits = 0
    trials = 40
    for seed in range(trials):
        noise = np.random.Generator(np.random.Philox(key=seed)).standard_normal(n)
        prob = TikhonovProblem(op, y + 1e-2 * noise / np.linalg.norm(noise), 1e-2, PenaltyConfig.uniform(0.5, n), 1e-3)
        hits += len(solve(prob).support) < n
    assert hits >= 0.95 * trials


@pytest.mark.parametrize("q", [1.0, 0.5])
def test_small_instances_match_grid_oracle(q):
    rng = np.random.Generator(np.random.Philox(key=99))
    for _ in range(4):
        n = 2
        A = rng.standard_normal((n, n)) + 2 * np.eye(n)
        y = rng.uniform(-2, 2, n)
        prob = TikhonovProblem(mat_op(A), y, 0.0, PenaltyConfig.uniform(q, n), 0.3)
        res = solve(prob, rel_tol=1e-13, max_iter=100000)
        _, f_oracle = tikhonov_grid_oracle(A, y, 0.3, q, box=3.0, step=1e-2)
        assert res.objective <= f_oracle + 1e-6
