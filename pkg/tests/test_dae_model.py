import numpy as np
import pytest

from pencildae import (MatrixPencil, NonFiniteJacobianError, SemilinearDAE,
                       check_jacobian, consistent_initialize, constraint_residual,
                       get_preset, jacobian, projectors_algebraic, split_state)


@pytest.fixture(scope="module")
def index0_problem():
    pencil = MatrixPencil(a=np.eye(2), b=np.array([[1.0, 0.0], [0.0, 2.0]]))
    dae = SemilinearDAE(pencil=pencil, f=lambda t, x: np.zeros(2),
                        jac_f=lambda t, x: np.zeros((2, 2)))
    return dae, projectors_algebraic(pencil)


@pytest.fixture(scope="module")
def sine_circuit():
    preset = get_preset("sec6_sine_powerdecay")
    return preset, projectors_algebraic(preset.dae.pencil)


class TestSplitState:
    def test_index0_split_is_trivial(self, index0_problem):
        dae, decomp = index0_problem
        x = np.array([3.0, -1.0])
        s = split_state(decomp, x)
        np.testing.assert_allclose(s.z, x)
        np.testing.assert_allclose(s.u, 0.0)

    def test_circuit_pure_algebraic_direction(self, sec5_decomp):
        s = split_state(sec5_decomp, np.array([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(s.u, [0.0, 0.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(s.z, 0.0, atol=1e-14)

    def test_circuit_pure_differential_direction(self, sec5_decomp):
        s = split_state(sec5_decomp, np.array([1.0, 0.0, 0.0]))
        np.testing.assert_allclose(s.z, [1.0, 0.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(s.u, 0.0, atol=1e-14)

    def test_recombination_identity(self, sec5_decomp):
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.standard_normal(3) * rng.uniform(0.1, 100.0)
            s = split_state(sec5_decomp, x)
            assert np.abs(s.z + s.u - x).max() <= 1e-12 * (1.0 + np.abs(x).max())

    def test_components_stay_in_subspaces(self, sec5_decomp):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(3)
        s = split_state(sec5_decomp, x)
        assert np.abs(sec5_decomp.p1 @ s.z - s.z).max() < 1e-13
        assert np.abs(sec5_decomp.p2 @ s.u - s.u).max() < 1e-13

    def test_dimension_mismatch(self, sec5_decomp):
        with pytest.raises(ValueError):
            split_state(sec5_decomp, np.zeros(4))


class TestConstraintResidual:
    def test_index0_residual_is_zero(self, index0_problem):
        dae, decomp = index0_problem
        _, norm = constraint_residual(dae, decomp, 0.3, np.array([5.0, -7.0]))
        assert norm == 0.0

    def test_circuit_origin_consistent(self, sec5_preset, sec5_decomp):
        _, norm = constraint_residual(sec5_preset.dae, sec5_decomp, 0.0, np.zeros(3))
        assert norm == 0.0

    def test_sine_circuit_paper_point_consistent(self, sine_circuit):
        preset, decomp = sine_circuit
        # x2 + r*x3 = -10 + 10 = 0 = sin(5) - sin(5)
        _, norm = constraint_residual(preset.dae, decomp, 0.0,
                                      np.array([10.0, -10.0, 5.0]))
        assert norm <= 1e-14

    def test_inconsistent_point_detected(self, sec5_preset, sec5_decomp):
        _, norm = constraint_residual(sec5_preset.dae, sec5_decomp, 0.0,
                                      np.array([0.0, 1.0, 0.0]))
        assert norm > 0.5


class TestJacobian:
    def test_linear_rhs_exact(self):
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        pencil = MatrixPencil(a=np.eye(2), b=np.zeros((2, 2)))
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: b @ x, jac_f=lambda t, x: b)
        np.testing.assert_array_equal(jacobian(dae, 0.0, np.ones(2)), b)

    def test_circuit_cubic_entry(self, sec5_preset):
        # d(-x1^3)/dx1 at x1 = 1
        jac = jacobian(sec5_preset.dae, 0.0, np.array([1.0, 0.0, 1.0]))
        assert jac[0, 0] == pytest.approx(-3.0)

    def test_forward_difference_scalar_square(self):
        pencil = MatrixPencil(a=np.eye(1), b=np.zeros((1, 1)))
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: x * x, fd_step=1e-7)
        jac = jacobian(dae, 0.0, np.array([2.0]))
        assert jac[0, 0] == pytest.approx(4.0, abs=1e-6)

    def test_fd_matches_analytic_at_reference_point(self, sec5_preset):
        assert check_jacobian(sec5_preset.dae, 0.7, [np.array([1.0, 0.0, 1.0])]) <= 1e-6

    def test_fd_matches_analytic_on_circuit(self, sec5_preset):
        rng = np.random.default_rng(5)
        probes = rng.uniform(-2.0, 2.0, size=(100, 3))
        # second derivatives of the cubic circuit f reach 6*(|x1|+2|x3|) <= 36
        # on this probe box, so the FD truncation allowance is 10*step*36
        curvature_bound = 36.0
        step = sec5_preset.dae.fd_step
        assert check_jacobian(sec5_preset.dae, 0.7, probes) <= 10 * step * curvature_bound

    def test_non_finite_jacobian_raises(self):
        pencil = MatrixPencil(a=np.eye(1), b=np.zeros((1, 1)))
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: x,
                            jac_f=lambda t, x: np.array([[np.nan]]))
        with pytest.raises(NonFiniteJacobianError):
            jacobian(dae, 0.0, np.zeros(1))

    def test_check_jacobian_needs_analytic(self, index0_problem):
        dae, _ = index0_problem
        fd_only = SemilinearDAE(pencil=dae.pencil, f=dae.f)
        with pytest.raises(ValueError):
            check_jacobian(fd_only, 0.0, [np.zeros(2)])


def bisect_circuit_constraint(z0, r=2.0, lo=-5.0, hi=5.0, tol=1e-14):
    """Scalar oracle for the cubic circuit: root of the consistency condition
    x2 + r*x3 = psi(x1 - x3) - phi(x3) in the algebraic coordinate."""
    z1, z2 = z0[0], z0[1]

    def g(c):
        # u = c*e3 on top of z0 = (z1, z2, -z2/r)
        x3 = -z2 / r + c
        return z2 + r * x3 - (z1 - x3) ** 3 + x3 ** 3

    glo, ghi = g(lo), g(hi)
    assert glo * ghi < 0, "oracle bracket must straddle the root"
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(lo) * g(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestConsistentInitialize:
    def test_index0_returns_zero(self, index0_problem):
        dae, decomp = index0_problem
        u0 = consistent_initialize(dae, decomp, 0.0, np.array([1.0, 2.0]))
        np.testing.assert_array_equal(u0, 0.0)

    def test_circuit_origin_fixed_point(self, sec5_preset, sec5_decomp):
        u0 = consistent_initialize(sec5_preset.dae, sec5_decomp, 0.0, np.zeros(3))
        np.testing.assert_allclose(u0, 0.0, atol=1e-14)

    def test_matches_bisection_oracle(self, sec5_preset, sec5_decomp):
        z0 = sec5_decomp.p1 @ np.array([1.0, 1.0, 0.0])
        u0 = consistent_initialize(sec5_preset.dae, sec5_decomp, 0.0, z0, tol=1e-13)
        c_oracle = bisect_circuit_constraint(z0)
        # u = c*e3: the third component carries the algebraic coordinate
        assert u0[2] == pytest.approx(c_oracle, abs=1e-10)
        assert abs(u0[0]) < 1e-14 and abs(u0[1]) < 1e-14

    def test_result_is_fixed_point(self, sec5_preset, sec5_decomp):
        dae, decomp = sec5_preset.dae, sec5_decomp
        z0 = decomp.p1 @ np.array([0.4, -0.3, 0.0])
        tol = 1e-12
        u0 = consistent_initialize(dae, decomp, 0.0, z0, tol=tol)
        fixed = decomp.g_inv @ decomp.q2 @ dae.f(0.0, z0 + u0)
        assert np.linalg.norm(u0 - fixed) <= tol

    def test_constraint_satisfied_after_init(self, sec5_preset, sec5_decomp):
        dae, decomp = sec5_preset.dae, sec5_decomp
        z0 = decomp.p1 @ np.array([2.0, 1.0, 0.0])
        u0 = consistent_initialize(dae, decomp, 0.0, z0, tol=1e-13)
        _, norm = constraint_residual(dae, decomp, 0.0, z0 + u0)
        assert norm <= 1e-12 * (1.0 + np.linalg.norm(dae.pencil.b, 2))

    def test_no_convergence_reports_last_residual(self, sec5_preset, sec5_decomp):
        from pencildae import NoConvergenceError
        z0 = sec5_decomp.p1 @ np.array([1.0, 1.0, 0.0])
        with pytest.raises(NoConvergenceError) as excinfo:
            consistent_initialize(sec5_preset.dae, sec5_decomp, 0.0, z0,
                                  tol=1e-13, max_iter=1)
        assert excinfo.value.last_residual > 1e-13

    def test_singular_newton_detected(self):
        from pencildae import SingularNewtonMatrixError
        # constraint x2 = x2 + 1: the restricted Newton matrix is exactly zero
        pencil = MatrixPencil(a=np.diag([1.0, 0.0]), b=np.eye(2))
        dae = SemilinearDAE(pencil=pencil, f=lambda t, x: np.array([0.0, x[1] + 1.0]),
                            jac_f=lambda t, x: np.array([[0.0, 0.0], [0.0, 1.0]]))
        decomp = projectors_algebraic(pencil)
        with pytest.raises(SingularNewtonMatrixError):
            consistent_initialize(dae, decomp, 0.0, np.array([1.0, 0.0]))

    def test_rejects_z0_outside_x1(self, sec5_preset, sec5_decomp):
        with pytest.raises(ValueError):
            consistent_initialize(sec5_preset.dae, sec5_decomp, 0.0,
                                  np.array([0.0, 0.0, 1.0]))

    def test_rejects_u_guess_outside_x2(self, sec5_preset, sec5_decomp):
        z0 = sec5_decomp.p1 @ np.array([1.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            consistent_initialize(sec5_preset.dae, sec5_decomp, 0.0, z0,
                                  u_guess=np.array([1.0, 0.0, 0.0]))
