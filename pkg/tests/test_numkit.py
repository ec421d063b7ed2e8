import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsdemc.numkit import (BlockMinNorm, DimensionError, InputError, MinNormFactor,
                           gram_diagnostic, solve_min_norm)


def pinv_oracle(a, b):
    # independent path: explicit SVD pseudo-inverse with the same relative cut
    u, s, vt = np.linalg.svd(a)
    cut = 1e-10 * s[0]
    s_inv = np.array([1 / v if v > cut else 0.0 for v in s])
    pinv = vt.T[:, :len(s)] @ np.diag(s_inv) @ u.T[:len(s)]
    return pinv @ b


def low_rank(rng, m, n, rank):
    return rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n))


class TestSolveMinNorm:
    def test_identity(self):
        sol = solve_min_norm(np.eye(3), [1.0, 2.0, 3.0])
        np.testing.assert_allclose(sol.coefficients, [1, 2, 3], atol=1e-14)
        assert sol.numerical_rank == 3
        assert sol.residual_norm == pytest.approx(0.0, abs=1e-14)

    def test_constant_column(self):
        sol = solve_min_norm(np.ones((4, 1)), [2.0] * 4)
        np.testing.assert_allclose(sol.coefficients, [2.0])

    def test_duplicated_columns_split_equally(self):
        sol = solve_min_norm(np.ones((2, 2)), [2.0, 2.0])
        np.testing.assert_allclose(sol.coefficients, [1.0, 1.0], atol=1e-14)
        assert sol.numerical_rank == 1

    def test_rank3_matches_pseudo_inverse(self):
        rng = np.random.default_rng(3)
        a = low_rank(rng, 8, 5, 3)
        b = rng.standard_normal(8)
        sol = solve_min_norm(a, b)
        assert sol.numerical_rank == 3
        np.testing.assert_allclose(sol.coefficients, np.linalg.pinv(a, rcond=1e-10) @ b, atol=1e-10)
        np.testing.assert_allclose(sol.coefficients, pinv_oracle(a, b), atol=1e-10)

    @pytest.mark.parametrize("m", range(1, 7))
    @pytest.mark.parametrize("n", range(1, 7))
    def test_oracle_all_small_shapes(self, m, n):
        rng = np.random.default_rng(100 * m + n)
        for rank in range(1, min(m, n) + 1):
            a = low_rank(rng, m, n, rank)
            b = rng.standard_normal(m)
            sol = solve_min_norm(a, b)
            np.testing.assert_allclose(sol.coefficients, pinv_oracle(a, b), atol=1e-8)
            assert sol.numerical_rank <= min(m, n)
            resid = a.T @ (b - a @ sol.coefficients)
            assert np.linalg.norm(resid) <= 1e-8 * (np.linalg.norm(a) * np.linalg.norm(b) + 1)

    def test_minimality_along_null_space(self):
        rng = np.random.default_rng(7)
        a = low_rank(rng, 10, 6, 3)
        b = rng.standard_normal(10)
        theta = solve_min_norm(a, b).coefficients
        null = np.linalg.svd(a)[2][3:]
        for _ in range(50):
            delta = rng.standard_normal(null.shape[0]) @ null
            assert np.linalg.norm(theta + delta) >= np.linalg.norm(theta) - 1e-12
            # still a minimizer
            assert np.linalg.norm(b - a @ (theta + delta)) == pytest.approx(
                np.linalg.norm(b - a @ theta), rel=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), c=st.floats(-1e3, 1e3, allow_nan=False))
    def test_scale_equivariance(self, seed, c):
        rng = np.random.default_rng(seed)
        a = low_rank(rng, 7, 4, int(rng.integers(1, 5)))
        b = rng.standard_normal(7)
        base = solve_min_norm(a, b).coefficients
        np.testing.assert_allclose(solve_min_norm(a, c * b).coefficients, c * base,
                                   atol=1e-9 * (1 + abs(c)) * (1 + np.abs(base).max()))

    def test_factor_reuse_matches_one_shot(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((30, 4))
        f = MinNormFactor(a)
        for _ in range(3):
            b = rng.standard_normal(30)
            np.testing.assert_array_equal(f.solve(b).coefficients, solve_min_norm(a, b).coefficients)

    def test_zero_matrix_gives_zero(self):
        sol = solve_min_norm(np.zeros((3, 2)), [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(sol.coefficients, [0.0, 0.0])
        assert sol.numerical_rank == 0

    @pytest.mark.parametrize("bad", [np.nan, np.inf])
    def test_non_finite_rejected(self, bad):
        a = np.eye(2)
        a[0, 1] = bad
        with pytest.raises(InputError):
            solve_min_norm(a, [1.0, 1.0])
        with pytest.raises(InputError):
            solve_min_norm(np.eye(2), [bad, 1.0])

    def test_shapes_rejected(self):
        with pytest.raises(DimensionError):
            solve_min_norm(np.zeros((0, 2)), [])
        with pytest.raises(DimensionError):
            solve_min_norm(np.eye(2), [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            solve_min_norm(np.eye(2), [1.0, 2.0], rank_tol=1.5)


class TestGramDiagnostic:
    def test_scaled_identity(self):
        m = 5
        lo, hi = gram_diagnostic(np.sqrt(m) * np.eye(m))
        assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)

    def test_zero_column(self):
        a = np.random.default_rng(0).standard_normal((20, 3))
        a[:, 1] = 0.0
        assert gram_diagnostic(a)[0] == 0.0

    def test_characteristic_polynomial_oracle(self):
        a = np.random.default_rng(11).standard_normal((100, 3))
        g = a.T @ a / 100
        # roots of det(lambda I - G) = lambda^3 - tr lambda^2 + c1 lambda - det
        c1 = 0.5 * (np.trace(g) ** 2 - np.trace(g @ g))
        roots = np.sort(np.roots([1.0, -np.trace(g), c1, -np.linalg.det(g)]).real)
        lo, hi = gram_diagnostic(a)
        assert lo == pytest.approx(roots[0], rel=1e-9)
        assert hi == pytest.approx(roots[-1], rel=1e-9)
        # sampling error of a 100-row standard-normal Gram matrix
        assert 0.5 < lo <= hi < 1.6

    def test_rejects_non_finite(self):
        with pytest.raises(InputError):
            gram_diagnostic(np.array([[1.0, np.nan]]))


def per_cell_oracle(cells, u, b, n_cells):
    out = np.zeros((n_cells, u.shape[1]))
    conds = np.ones(n_cells)
    for c in range(n_cells):
        rows = cells == c
        if rows.any():
            out[c] = np.linalg.pinv(u[rows], rcond=1e-10) @ b[rows]
            s = np.linalg.svd(u[rows], compute_uv=False)
            s = s[s > 1e-10 * s[0]]
            conds[c] = s[0] / s[-1]
    return out, conds


def block_instance(p, seed, m=400, n_cells=40):
    rng = np.random.default_rng(seed)
    cells = rng.integers(-1, n_cells, size=m)
    cells[cells == 7] = 8   # an empty cell
    cells[cells == 6] = 9
    cells[0] = 6            # a singleton: rank deficient when p > 1
    cells[cells == 5] = 10
    cells[1:3] = 5          # two rows: rank deficient when p > 2
    u = np.column_stack([np.ones(m)] + [rng.standard_normal(m) for _ in range(p - 1)])
    return cells, u, rng.standard_normal(m), n_cells


class TestBlockMinNorm:
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_matches_dense_path(self, p):
        cells, u, b, n_cells = block_instance(p, p)
        block = BlockMinNorm(cells, u, n_cells)
        sol = block.solve(b)
        dense = solve_min_norm(block.dense_design(), b)
        np.testing.assert_allclose(sol.coefficients.ravel(), dense.coefficients, atol=1e-12)
        assert sol.numerical_rank == dense.numerical_rank
        assert sol.residual_norm == pytest.approx(dense.residual_norm, rel=1e-10)
        np.testing.assert_array_equal(sol.coefficients[7], 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_per_cell_svd(self, seed):
        # small random cells are badly conditioned; accuracy is eps * cond
        cells, u, b, n_cells = block_instance(3, seed, m=120)
        sol = BlockMinNorm(cells, u, n_cells).solve(b).coefficients
        ref, conds = per_cell_oracle(cells, u, b, n_cells)
        err = np.abs(sol - ref).max(axis=1)
        assert np.all(err <= 1e-13 * conds * (1 + np.abs(ref).max(axis=1)))

    def test_rejects_bad_input(self):
        with pytest.raises(DimensionError):
            BlockMinNorm(np.zeros(3, dtype=int), np.ones((4, 1)), 1)
        with pytest.raises(InputError):
            BlockMinNorm(np.zeros(2, dtype=int), np.array([[1.0], [np.inf]]), 1)
