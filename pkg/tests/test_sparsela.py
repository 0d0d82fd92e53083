"""Tests of the sparse kernels: matvec, preconditioned CG, damped Newton."""

import numpy as np
import pytest
import scipy.sparse as sp

from fracfisher.sparsela import (NewtonError, SolveReport, as_csr, cg_solve,
                                 matvec, newton_solve)


def laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)],
                    [-1, 0, 1], format="csr")


class TestMatvec:
    def test_identity(self):
        x = np.arange(5.0)
        np.testing.assert_array_equal(matvec(sp.eye(5, format="csr"), x), x)

    def test_zero_matrix(self):
        A = sp.csr_matrix((4, 4))
        np.testing.assert_array_equal(matvec(A, np.ones(4)), np.zeros(4))

    def test_neumann_stencil_annihilates_constants(self):
        from fracfisher.femspace import assemble_stiffness, build_mesh
        K = assemble_stiffness(build_mesh(6, 6))
        out = matvec(K, np.ones(K.shape[0]))
        np.testing.assert_allclose(out, 0.0, atol=1e-13)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matvec(sp.eye(3, format="csr"), np.ones(4))

    def test_bitwise_reproducible(self):
        rng = np.random.default_rng(7)
        A = as_csr(sp.random(50, 50, density=0.2, random_state=3))
        x = rng.standard_normal(50)
        np.testing.assert_array_equal(matvec(A, x), matvec(A, x))


class TestCgSolve:
    def test_identity_converges_immediately(self):
        b = np.array([3.0, -1.0, 2.0])
        x, rep = cg_solve(sp.eye(3, format="csr"), b)
        np.testing.assert_allclose(x, b, rtol=1e-12)
        assert rep.converged and rep.iterations <= 1

    def test_diagonal_with_jacobi(self):
        A = sp.diags([1.0, 10.0, 100.0, 1000.0]).tocsr()
        b = np.array([1.0, 2.0, 3.0, 4.0])
        x, rep = cg_solve(A, b, preconditioner="jacobi")
        np.testing.assert_allclose(x, b / A.diagonal(), rtol=1e-10)
        assert rep.iterations <= 2

    def test_two_by_two_hand_solve(self):
        A = as_csr(np.array([[2.0, 1.0], [1.0, 2.0]]))
        x, rep = cg_solve(A, np.array([3.0, 3.0]))
        np.testing.assert_allclose(x, [1.0, 1.0], rtol=1e-12)
        assert rep.converged

    def test_zero_rhs(self):
        x, rep = cg_solve(laplacian_1d(8), np.zeros(8))
        np.testing.assert_array_equal(x, np.zeros(8))
        assert rep.converged and rep.iterations == 0

    def test_converges_on_poisson_system(self):
        n = 200
        A = laplacian_1d(n)
        rng = np.random.default_rng(0)
        b = rng.standard_normal(n)
        x, rep = cg_solve(A, b, tol=1e-12)
        assert rep.converged
        assert np.linalg.norm(b - A @ x) <= 1e-12 * np.linalg.norm(b)

    def test_residual_history_sampled_every_10_nonincreasing(self):
        # representative per-step operator: mass-plus-scaled-stiffness
        from fracfisher.femspace import assemble_mass, assemble_stiffness, build_mesh
        mesh = build_mesh(32, 32)
        A = as_csr(2.85 * assemble_mass(mesh) + 1e-3 * assemble_stiffness(mesh))
        rng = np.random.default_rng(1)
        b = rng.standard_normal(A.shape[0])
        _, rep = cg_solve(A, b, tol=1e-12, collect_history=True)
        assert rep.converged
        sampled = np.array(rep.residual_history)[::10]
        assert np.all(np.diff(sampled) <= 0.0)

    def test_indefinite_matrix_detected(self):
        A = sp.diags([1.0, -1.0, 2.0]).tocsr()
        b = np.ones(3)
        _, rep = cg_solve(A, b, preconditioner=None)
        assert rep.indefinite
        assert not rep.converged

    def test_nonconvergence_returns_best_iterate(self):
        n = 100
        A = laplacian_1d(n)
        b = np.ones(n)
        x, rep = cg_solve(A, b, tol=1e-14, maxit=3)
        assert not rep.converged
        assert rep.iterations == 3
        assert x.shape == (n,)

    def test_report_rejects_negative_residual(self):
        with pytest.raises(ValueError):
            SolveReport(iterations=1, residual=-1.0, converged=False)


class TestNewtonSolve:
    def test_linear_system_in_one_step(self):
        A = as_csr(np.array([[4.0, 1.0], [1.0, 3.0]]))
        b = np.array([1.0, 2.0])
        x, rep = newton_solve(lambda u: A @ u - b, lambda u: A, np.zeros(2))
        np.testing.assert_allclose(A @ x, b, atol=1e-10)
        assert rep.iterations <= 2

    def test_scalar_quadratic(self):
        res = lambda u: u * u - 4.0
        jac = lambda u: as_csr(np.array([[2.0 * u[0]]]))
        x, rep = newton_solve(res, jac, np.array([3.0]), tol=1e-10)
        assert abs(x[0] - 2.0) <= 1e-10
        assert rep.iterations <= 6

    def test_already_converged_returns_zero_iterations(self):
        A = sp.eye(3, format="csr")
        x0 = np.array([1.0, 2.0, 3.0])
        x, rep = newton_solve(lambda u: u - x0, lambda u: A, x0.copy())
        assert rep.iterations == 0
        np.testing.assert_array_equal(x, x0)

    def test_quadratic_convergence_trace(self):
        # residual of a smooth scalar problem: trace below 1e-3 must contract
        # at least quadratically (up to a modest constant)
        res = lambda u: np.array([np.exp(u[0]) - 2.0])
        jac = lambda u: as_csr(np.array([[np.exp(u[0])]]))
        _, rep = newton_solve(res, jac, np.array([3.0]), tol=1e-14)
        tr = rep.residual_history
        for r0, r1 in zip(tr, tr[1:]):
            if r0 < 1e-3 and r1 > 1e-15:
                assert r1 <= 10.0 * r0 * r0

    def test_max_iterations_raises_distinct_reason(self):
        # gradient stays tiny, so steps barely move: hits the iteration cap
        res = lambda u: np.array([np.sign(u[0]) * np.sqrt(np.abs(u[0])) + 1e-3])
        jac = lambda u: as_csr(np.array([[0.5 / np.sqrt(np.abs(u[0]) + 1e-12)]]))
        with pytest.raises(NewtonError) as err:
            newton_solve(res, jac, np.array([4.0]), tol=1e-30, maxit=4)
        assert err.value.reason in ("max_iterations", "damping_floor")

    def test_damping_floor_raises_distinct_reason(self):
        # residual norm cannot decrease anywhere: every backtrack fails
        res = lambda u: np.array([1.0])
        jac = lambda u: as_csr(np.array([[1.0]]))
        with pytest.raises(NewtonError) as err:
            newton_solve(res, jac, np.array([0.0]), tol=1e-12)
        assert err.value.reason == "damping_floor"
