import math

import numpy as np
import pytest

from pertcv.numerics import (
    ConditioningWarning,
    Grid1D,
    SingularMatrixError,
    chain_drift_matrix,
    chain_lyapunov_solution,
    cumulative_trapezoid,
    lyapunov_residual,
    quad_simpson,
    quad_trapezoid,
    solve_dense,
)


class TestGrid:
    def test_requires_increasing_nodes(self):
        with pytest.raises(ValueError):
            Grid1D(np.array([0.0, 0.0, 1.0]))
        with pytest.raises(ValueError):
            Grid1D(np.array([1.0]))

    def test_uniform_detection(self):
        assert Grid1D.uniform_grid(0, 1, 11).uniform
        assert not Grid1D(np.array([0.0, 0.1, 0.3])).uniform


class TestQuadrature:
    def test_constant_is_exact(self):
        for grid in [Grid1D.uniform_grid(0, 1, 7), Grid1D(np.array([0.0, 0.3, 0.55, 1.0]))]:
            assert quad_trapezoid(lambda x: np.ones_like(x), grid) == pytest.approx(1.0, abs=1e-15)
        assert quad_simpson(lambda x: np.ones_like(x), Grid1D.uniform_grid(0, 1, 7)) == pytest.approx(1.0)

    def test_sin_squared_over_period(self):
        grid = Grid1D.uniform_grid(0, 2 * np.pi, 1001)
        assert quad_simpson(np.sin(grid.nodes) ** 2, grid) == pytest.approx(np.pi, abs=1e-8)
        assert quad_trapezoid(np.sin(grid.nodes) ** 2, grid) == pytest.approx(np.pi, abs=1e-8)

    def test_simpson_rejects_even_node_count_and_nonuniform(self):
        with pytest.raises(ValueError):
            quad_simpson(lambda x: x, Grid1D.uniform_grid(0, 1, 8))
        with pytest.raises(ValueError):
            quad_simpson(lambda x: x, Grid1D(np.array([0.0, 0.1, 1.0])))

    def test_rejects_non_finite_samples(self):
        grid = Grid1D.uniform_grid(-1, 1, 5)
        with pytest.raises(ValueError):
            quad_trapezoid(lambda x: 1.0 / x, grid)

    def test_gaussian_moments_symmetry(self):
        # moments of exp(-v), v = r^2/2: M1 = 0 and M2/M0 = 1
        grid = Grid1D.uniform_grid(-12, 12, 4001)
        w = np.exp(-grid.nodes**2 / 2)
        m0 = quad_simpson(w, grid)
        m1 = quad_simpson(grid.nodes * w, grid)
        m2 = quad_simpson(grid.nodes**2 * w, grid)
        assert m1 == pytest.approx(0.0, abs=1e-12)
        assert m2 / m0 == pytest.approx(1.0, rel=1e-10)

    def test_simpson_fourth_order_convergence(self):
        # On [-8, 1] the boundary derivative term is alive, exposing the h^4 law.
        from scipy.integrate import quad

        f = lambda x: np.exp(-(x**2))
        exact = quad(lambda x: math.exp(-x * x), -8, 1, epsabs=1e-15)[0]
        errors, spacings = [], []
        for n in [33, 65, 129, 257, 513]:
            grid = Grid1D.uniform_grid(-8, 1, n)
            errors.append(abs(quad_simpson(f, grid) - exact))
            spacings.append(grid.spacing)
        slope = np.polyfit(np.log(spacings), np.log(errors), 1)[0]
        assert slope == pytest.approx(4.0, abs=0.3)

    def test_simpson_gaussian_converges_at_least_fourth_order(self):
        # With all boundary derivatives ~0 the error drops faster than h^4
        # until it hits machine precision.
        f = lambda x: np.exp(-(x**2))
        exact = math.sqrt(math.pi) * math.erf(8.0)
        prev = None
        for n in [25, 33, 41, 49]:
            err = abs(quad_simpson(f, Grid1D.uniform_grid(-8, 8, n)) - exact)
            if prev is not None and err > 1e-14:
                assert err < prev / 10.0
            prev = err


class TestCumulativeTrapezoid:
    def test_constant(self):
        grid = Grid1D.uniform_grid(0, 1, 11)
        out = cumulative_trapezoid(np.ones(11), grid)
        np.testing.assert_allclose(out, np.linspace(0, 1, 11), atol=1e-15)

    def test_linear_ramp_exact(self):
        grid = Grid1D.uniform_grid(0, 2, 21)
        out = cumulative_trapezoid(grid.nodes, grid)
        np.testing.assert_allclose(out, grid.nodes**2 / 2, atol=1e-14)

    def test_prefix_consistency_with_quadrature(self):
        rng = np.random.default_rng(0)
        nodes = np.sort(rng.uniform(0, 5, 100))
        nodes[0] = 0.0
        grid = Grid1D(nodes)
        vals = np.cos(nodes) + 0.3 * nodes
        cum = cumulative_trapezoid(vals, grid)
        for k in [1, 7, 42, 99]:
            prefix = Grid1D(nodes[: k + 1])
            assert cum[k] == pytest.approx(quad_trapezoid(vals[: k + 1], prefix), abs=1e-14)


class TestSolveDense:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(solve_dense(np.eye(3), b), b)

    def test_diagonal(self):
        b = np.array([2.0, 4.0])
        np.testing.assert_allclose(solve_dense(2.0 * np.eye(2), b), b / 2)

    def test_random_well_conditioned_systems(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = rng.standard_normal((50, 50)) + 50 * np.eye(50)
            b = rng.standard_normal(50)
            x = solve_dense(a, b)
            resid = np.linalg.norm(a @ x - b, ord=np.inf)
            scale = np.linalg.norm(a, ord=np.inf) * np.linalg.norm(x, ord=np.inf) + np.linalg.norm(b, ord=np.inf)
            assert resid <= 1e-10 * scale

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError):
            solve_dense(np.zeros((3, 3)), np.ones(3))

    def test_conditioning_warning(self):
        # LU is backward stable, so force the bound below roundoff to see the warning
        rng = np.random.default_rng(3)
        a = rng.standard_normal((40, 40))
        with pytest.warns(ConditioningWarning):
            solve_dense(a, rng.standard_normal(40), residual_rtol=1e-22)


class TestChainLyapunov:
    def test_three_by_three_identity_by_hand(self):
        # N=2, nu=1: verify A^T K + K A = R against a literal matrix product
        a = chain_drift_matrix(2, 1.0)
        k = chain_lyapunov_solution(2, 1.0)
        r = np.diag([1.0, 0.0, -1.0])
        np.testing.assert_allclose(a.T @ k + k @ a, r, atol=1e-15)
        assert lyapunov_residual(2, 1.0) < 1e-14

    def test_larger_chain(self):
        assert lyapunov_residual(32, 0.5) < 1e-13

    def test_k_is_symmetric(self):
        for n, nu in [(2, 0.3), (5, 1.0), (16, 4.0)]:
            k = chain_lyapunov_solution(n, nu)
            assert np.abs(k - k.T).max() == 0.0

    @pytest.mark.parametrize("n", [2, 4, 8, 16, 32, 64])
    @pytest.mark.parametrize("nu", [0.1, 0.5, 1.0, 2.0, 10.0])
    def test_identity_across_sizes(self, n, nu):
        assert lyapunov_residual(n, nu) < 1e-12
