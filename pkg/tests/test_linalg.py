"""Linear-solver tests: triplet assembly validation, solve() against dense
references, the independently recomputed residual certificate, the zero-mean
CG for singular pressure systems, and the rank-one mean augmentation."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from vpsep.grid import Grid
from vpsep.linalg import (SolveResult, SolverConfig, SolverError,
                          assemble_from_triplets, mean_augmented, solve,
                          solve_cg_zero_mean)
from vpsep.matrices import operator_mats

RNG = np.random.default_rng(77)


def shifted_laplacian(grid, shift=10.0):
    om = operator_mats(grid)
    return (sp.identity(grid.n_cells, format="csr") * shift - om.lap).tocsr()


class TestTriplets:
    def test_duplicates_sum(self):
        mat = assemble_from_triplets([0, 0, 1], [0, 0, 1], [2.0, 3.0, 4.0],
                                     (2, 2))
        dense = mat.toarray()
        assert dense[0, 0] == 5.0
        assert dense[1, 1] == 4.0
        assert dense[0, 1] == 0.0

    def test_bounds_checked(self):
        with pytest.raises(ValueError, match="row index"):
            assemble_from_triplets([2], [0], [1.0], (2, 2))
        with pytest.raises(ValueError, match="column index"):
            assemble_from_triplets([0], [-1], [1.0], (2, 2))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            assemble_from_triplets([0], [0], [np.nan], (1, 1))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError, match="identical shapes"):
            assemble_from_triplets([0, 1], [0], [1.0], (2, 2))


class TestSolve:
    def test_matches_dense_reference(self, grid_aniso):
        mat = shifted_laplacian(grid_aniso)
        b = RNG.standard_normal(grid_aniso.n_cells)
        res = solve(mat, b, config=SolverConfig(rtol=1e-12))
        x_dense = np.linalg.solve(mat.toarray(), b)
        assert np.allclose(res.x, x_dense, atol=1e-9 * np.abs(x_dense).max())

    def test_residual_certificate_is_recomputed(self, grid16):
        mat = shifted_laplacian(grid16)
        b = RNG.standard_normal(grid16.n_cells)
        res = solve(mat, b, config=SolverConfig(rtol=1e-11))
        check = float(np.linalg.norm(b - mat @ res.x))
        assert res.residual == pytest.approx(check, rel=1e-12)
        assert res.residual <= 1e-11 * np.linalg.norm(b)

    def test_zero_rhs_short_circuits(self, grid16):
        mat = shifted_laplacian(grid16)
        res = solve(mat, np.zeros(grid16.n_cells))
        assert isinstance(res, SolveResult)
        assert np.all(res.x == 0.0)
        assert res.residual == 0.0
        assert res.iterations == 0

    def test_good_initial_guess_short_circuits(self, grid16):
        mat = shifted_laplacian(grid16)
        b = RNG.standard_normal(grid16.n_cells)
        x_exact = np.linalg.solve(mat.toarray(), b)
        res = solve(mat, b, x0=x_exact, config=SolverConfig(rtol=1e-8))
        assert res.iterations == 0
        assert np.array_equal(res.x, x_exact)

    def test_bad_initial_guess_is_ignored(self, grid16):
        mat = shifted_laplacian(grid16)
        b = RNG.standard_normal(grid16.n_cells)
        bad = np.full(grid16.n_cells, np.nan)
        res = solve(mat, b, x0=bad, config=SolverConfig(rtol=1e-10))
        assert np.all(np.isfinite(res.x))

    def test_deterministic(self, grid16):
        mat = shifted_laplacian(grid16)
        b = RNG.standard_normal(grid16.n_cells)
        r1 = solve(mat, b)
        r2 = solve(mat, b)
        assert np.array_equal(r1.x, r2.x)

    def test_zero_diagonal_entries_tolerated(self):
        # Jacobi preconditioning must not divide by a zero diagonal.
        mat = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        res = solve(mat, np.array([2.0, 3.0]), config=SolverConfig(rtol=1e-12))
        assert np.allclose(res.x, [3.0, 2.0], atol=1e-10)

    def test_rejects_non_finite_rhs(self, grid16):
        mat = shifted_laplacian(grid16)
        b = np.zeros(grid16.n_cells)
        b[0] = np.inf
        with pytest.raises(SolverError, match="non-finite"):
            solve(mat, b)

    def test_raises_when_budget_exhausted(self):
        grid = Grid(16, 16)
        om = operator_mats(grid)
        mat = (sp.identity(grid.n_cells) * 1e-9 - om.lap).tocsr()
        b = RNG.standard_normal(grid.n_cells)
        cfg = SolverConfig(rtol=1e-15, maxiter=1, restart=2)
        with pytest.raises(SolverError, match="residual"):
            solve(mat, b, config=cfg)

    def test_linear_operator_with_external_preconditioner(self, grid16):
        mat = shifted_laplacian(grid16)
        op = mean_augmented(mat, 0, grid16.n_cells, weight=0.0)
        b = RNG.standard_normal(grid16.n_cells)
        res = solve(op, b, config=SolverConfig(rtol=1e-11),
                    precond_from=mat)
        x_dense = np.linalg.solve(mat.toarray(), b)
        assert np.allclose(res.x, x_dense, atol=1e-8 * np.abs(x_dense).max())


class TestZeroMeanCG:
    def test_matches_dense_zero_mean_solution(self, grid_aniso):
        om = operator_mats(grid_aniso)
        mat = (-om.lap).tocsr()
        n = grid_aniso.n_cells
        b = RNG.standard_normal(n)
        b -= b.mean()
        x = solve_cg_zero_mean(mat, b, rtol=1e-12)
        # dense reference via the mean-pinned KKT system
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = mat.toarray()
        kkt[:n, n] = 1.0
        kkt[n, :n] = 1.0
        rhs = np.concatenate([b, [0.0]])
        x_ref = np.linalg.solve(kkt, rhs)[:n]
        assert abs(x.mean()) <= 1e-12 * max(1.0, np.abs(x).max())
        assert np.allclose(x, x_ref, atol=1e-9 * np.abs(x_ref).max())

    def test_zero_rhs(self, grid16):
        om = operator_mats(grid16)
        x = solve_cg_zero_mean(-om.lap, np.zeros(grid16.n_cells))
        assert np.all(x == 0.0)

    def test_mean_of_rhs_is_projected_out(self, grid16):
        om = operator_mats(grid16)
        mat = -om.lap
        b = RNG.standard_normal(grid16.n_cells)
        b -= b.mean()
        x1 = solve_cg_zero_mean(mat, b, rtol=1e-12)
        x2 = solve_cg_zero_mean(mat, b + 7.5, rtol=1e-12)
        assert np.allclose(x1, x2, atol=1e-9 * max(1.0, np.abs(x1).max()))

    def test_raises_when_budget_exhausted(self, grid32):
        om = operator_mats(grid32)
        b = RNG.standard_normal(grid32.n_cells)
        b -= b.mean()
        with pytest.raises(SolverError, match="CG"):
            solve_cg_zero_mean(-om.lap, b, rtol=1e-14, maxiter=2)


class TestMeanAugmented:
    def test_matvec_adds_block_mean(self):
        a = sp.csr_matrix(RNG.standard_normal((6, 6)))
        op = mean_augmented(a, block_start=2, block_len=3, weight=2.5)
        v = RNG.standard_normal(6)
        out = op @ v
        expected = a @ v
        expected[2:5] += 2.5 * v[2:5].mean()
        assert np.allclose(out, expected, atol=1e-14)

    def test_zero_weight_is_plain_matrix(self):
        a = sp.csr_matrix(RNG.standard_normal((5, 5)))
        op = mean_augmented(a, 0, 5, weight=0.0)
        v = RNG.standard_normal(5)
        assert np.allclose(op @ v, a @ v, atol=1e-15)
