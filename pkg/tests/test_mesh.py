import numpy as np
import pytest

from gpcbo.errors import InputDomainError
from gpcbo.mesh import (
    gradient_components,
    laplacian,
    make_grid_mesh,
    make_interval_mesh,
    second_derivative,
)


def observed_order(e_coarse, e_fine, ratio=2.0):
    return np.log(e_coarse / e_fine) / np.log(ratio)


class TestIntervalMesh:
    def test_three_points(self):
        m = make_interval_mesh(0.0, 1.0, 3)
        np.testing.assert_array_equal(m.points[:, 0], [0.0, 0.5, 1.0])
        np.testing.assert_allclose(m.quad_weights, [0.25, 0.5, 0.25], rtol=1e-15)

    def test_weight_sum(self):
        m = make_interval_mesh(0.0, np.pi / 2, 50)
        assert m.size == 50
        assert m.quad_weights.sum() == pytest.approx(np.pi / 2, rel=1e-12)

    def test_too_few_points(self):
        with pytest.raises(InputDomainError):
            make_interval_mesh(0.0, 1.0, 2)

    def test_bad_interval(self):
        with pytest.raises(InputDomainError):
            make_interval_mesh(1.0, 0.0, 10)

    def test_uniform_and_increasing(self):
        m = make_interval_mesh(-2.0, 3.0, 41)
        dx = np.diff(m.points[:, 0])
        assert np.all(dx > 0)
        np.testing.assert_allclose(dx, m.spacing[0], rtol=1e-12)

    def test_interior_mask(self):
        m = make_interval_mesh(0.0, 1.0, 6)
        np.testing.assert_array_equal(m.boundary_indices, [0, 5])


class TestGridMesh:
    def test_three_by_three(self):
        m = make_grid_mesh(3, 3)
        h = 0.5
        assert m.size == 9
        assert m.quad_weights[0] == pytest.approx(h * h / 4)
        assert m.quad_weights[4] == pytest.approx(h * h)

    def test_thirty_by_thirty(self):
        m = make_grid_mesh(30, 30)
        assert m.size == 900
        assert m.boundary_indices.size == 4 * 30 - 4

    def test_unit_area(self):
        assert make_grid_mesh(17, 9).quad_weights.sum() == pytest.approx(1.0, rel=1e-12)

    def test_row_major_x_slow(self):
        m = make_grid_mesh(4, 3)
        assert np.all(m.points[:3, 0] == 0.0)
        np.testing.assert_allclose(m.points[:3, 1], [0.0, 0.5, 1.0])
        order = np.lexsort((m.points[:, 1], m.points[:, 0]))
        np.testing.assert_array_equal(order, np.arange(m.size))

    def test_rectangle(self):
        m = make_grid_mesh(5, 7, lower=(-1.0, 0.0), upper=(1.0, 3.0))
        assert m.integrate(np.full(m.size, 2.5)) == pytest.approx(2.5 * 6.0, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 0, 2.5])
    def test_rejects_small(self, n):
        with pytest.raises(InputDomainError):
            make_grid_mesh(n, 5)


class TestQuadrature:
    @pytest.mark.parametrize("mesh", [make_interval_mesh(0.0, 2.0, 11), make_grid_mesh(6, 9)])
    def test_constant(self, mesh):
        c = 3.7
        assert mesh.integrate(np.full(mesh.size, c)) == pytest.approx(c * mesh.measure, rel=1e-12)

    def test_batch(self):
        m = make_interval_mesh(0.0, 1.0, 21)
        U = np.vstack([np.ones(m.size), 2 * np.ones(m.size)])
        np.testing.assert_allclose(m.integrate(U), [1.0, 2.0], rtol=1e-12)

    def test_rows_independent_of_batch(self):
        m = make_grid_mesh(8, 8)
        U = np.random.default_rng(5).normal(size=(24, m.size))
        whole = m.integrate(U)
        for k in (2, 3, 4, 5):
            parts = np.concatenate([m.integrate(p) for p in np.array_split(U, k)])
            np.testing.assert_array_equal(parts, whole)

    def test_wrong_length(self):
        with pytest.raises(InputDomainError):
            make_interval_mesh(0.0, 1.0, 5).integrate(np.ones(4))


class TestSecondDerivative:
    def test_affine_zero(self):
        m = make_interval_mesh(0.0, 1.0, 20)
        x = m.points[:, 0]
        np.testing.assert_allclose(second_derivative(3 * x - 1, m), 0.0, atol=1e-9)

    def test_quadratic_exact(self):
        m = make_interval_mesh(-1.0, 2.0, 31)
        x = m.points[:, 0]
        d2 = second_derivative(x**2, m)
        assert d2.shape == (29,)
        np.testing.assert_allclose(d2, 2.0, rtol=1e-9)

    def test_sine(self):
        P = 158  # spacing 0.01 on [0, pi/2]
        m = make_interval_mesh(0.0, (P - 1) * 0.01, P)
        x = m.points[:, 0]
        err = np.abs(second_derivative(np.sin(x), m) + np.sin(x[1:-1]))
        assert err.max() <= 1e-4

    def test_order(self):
        errs = []
        for P in (21, 41):
            m = make_interval_mesh(0.0, 1.0, P)
            x = m.points[:, 0]
            errs.append(np.max(np.abs(second_derivative(np.exp(x), m) - np.exp(x[1:-1]))))
        assert observed_order(*errs) >= 1.9

    def test_linear(self):
        m = make_interval_mesh(0.0, 1.0, 15)
        rng = np.random.default_rng(0)
        u, v = rng.normal(size=(2, m.size))
        lhs = second_derivative(2.5 * u - 0.5 * v, m)
        rhs = 2.5 * second_derivative(u, m) - 0.5 * second_derivative(v, m)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(lhs).max())

    def test_batch_matches_rows(self):
        m = make_interval_mesh(0.0, 1.0, 12)
        U = np.random.default_rng(1).normal(size=(4, m.size))
        np.testing.assert_array_equal(
            second_derivative(U, m), np.vstack([second_derivative(u, m) for u in U])
        )

    def test_needs_1d(self):
        with pytest.raises(InputDomainError):
            second_derivative(np.zeros(9), make_grid_mesh(3, 3))


class TestLaplacian:
    def test_poisson_solution(self):
        m = make_grid_mesh(30, 30)
        x, y = m.points.T
        lap = laplacian(1 + x**2 + 2 * y**2, m)
        assert lap.shape == (28 * 28,)
        np.testing.assert_allclose(lap, 6.0, rtol=1e-9)

    def test_constant(self):
        m = make_grid_mesh(7, 5)
        np.testing.assert_allclose(laplacian(np.full(m.size, 4.2), m), 0.0, atol=1e-10)

    def test_cubic_one_variable(self):
        m = make_grid_mesh(11, 6)
        x, _ = m.points.T
        lap = laplacian(x**3, m)
        xi = m.points[m.interior_mask, 0]
        np.testing.assert_allclose(lap, 6 * xi, atol=1e-10)

    def test_order(self):
        errs = []
        for n in (17, 33):
            m = make_grid_mesh(n, n)
            x, y = m.points.T
            u = np.sin(np.pi * x) * np.sin(np.pi * y)
            exact = -2 * np.pi**2 * u[m.interior_mask]
            errs.append(np.max(np.abs(laplacian(u, m) - exact)))
        assert observed_order(*errs) >= 1.9

    def test_linear(self):
        m = make_grid_mesh(8, 8)
        rng = np.random.default_rng(2)
        u, v = rng.normal(size=(2, m.size))
        lhs = laplacian(-1.5 * u + 4 * v, m)
        rhs = -1.5 * laplacian(u, m) + 4 * laplacian(v, m)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(lhs).max())

    def test_batch(self):
        m = make_grid_mesh(6, 5)
        U = np.random.default_rng(3).normal(size=(2, 3, m.size))
        out = laplacian(U, m)
        assert out.shape == (2, 3, 12)
        np.testing.assert_array_equal(out[1, 2], laplacian(U[1, 2], m))


class TestInterpolation:
    def test_1d_at_nodes_and_between(self):
        m = make_interval_mesh(0.0, np.pi / 2, 50)
        u = 2 * np.sin(m.points[:, 0])
        np.testing.assert_allclose(m.interpolate(u, m.points[5:8]), u[5:8], atol=1e-14)
        assert m.interpolate(u, [1.189997])[0] == pytest.approx(2 * np.sin(1.189997), abs=1e-6)

    def test_2d_quadratic(self):
        m = make_grid_mesh(15, 15)
        x, y = m.points.T
        u = 1 + x**2 + 2 * y**2
        p = np.array([[0.72413793, 0.75862069], [0.1, 0.93]])
        want = 1 + p[:, 0] ** 2 + 2 * p[:, 1] ** 2
        # not-a-knot end conditions make the tensor spline only nearly exact
        np.testing.assert_allclose(m.interpolate(u, p), want, atol=1e-5)

    def test_batched_2d(self):
        m = make_grid_mesh(6, 6)
        U = np.random.default_rng(4).normal(size=(3, m.size))
        p = [[0.3, 0.4]]
        out = m.interpolate(U, p)
        assert out.shape == (3, 1)
        assert out[2, 0] == pytest.approx(m.interpolate(U[2], p)[0])


def test_gradient_of_plane():
    m = make_grid_mesh(5, 4)
    x, y = m.points.T
    gx, gy = gradient_components(2 * x - 3 * y, m)
    np.testing.assert_allclose(gx, 2.0)
    np.testing.assert_allclose(gy, -3.0)
