import numpy as np
import pytest

from maslovflow import (
    ChartDomainError,
    RotatedCoefficients,
    SkewHermitian,
    SymmetricChart,
    ThetaTrace,
    UnitarySymmetric,
    cayley,
    chart_from_frame,
    dexpinv,
    emk_step,
    farfield_frame,
    get_model,
    integrate_chart,
    integrate_unitary,
    inverse_cayley,
    kdv7_field,
    mat_exp,
    poschl_teller_field,
    riccati_rhs,
    rotated_coefficients,
    sym_eig,
    theta_from_chart,
    unitary_from_frame,
    validate_coefficients,
    xi_field,
)
from maslovflow.errors import StepSizeError
from maslovflow.matrixkit import symmetrize
from conftest import random_lagrangian_frame


def _random_coeffs(rng, n):
    a = rng.standard_normal((n, n))
    b = symmetrize(rng.standard_normal((n, n)))
    c = symmetrize(rng.standard_normal((n, n)))
    return validate_coefficients(a, b, c, -a.T)


def _random_chart(rng, n, scale=1.0):
    return SymmetricChart(scale * symmetrize(rng.standard_normal((n, n))))


class TestCayley:
    def test_zero_maps_to_identity(self):
        assert np.allclose(cayley(SymmetricChart(np.zeros((3, 3)))).mat, np.eye(3))

    def test_scalar_one_maps_to_minus_i(self):
        u = cayley(SymmetricChart(np.array([[1.0]]))).mat
        assert abs(u[0, 0] - (-1j)) < 1e-14

    def test_eigenvalue_map(self, rng):
        for _ in range(10):
            s = _random_chart(rng, 4, scale=2.0)
            mu = sym_eig(s.mat).eigenvalues
            expected = np.sort_complex((1 - 1j * mu) / (1 + 1j * mu))
            got = np.sort_complex(np.linalg.eigvals(cayley(s).mat))
            assert np.max(np.abs(np.sort(np.angle(got)) - np.sort(np.angle(expected)))) < 1e-10


class TestInverseCayley:
    def test_identity_maps_to_zero(self):
        s = inverse_cayley(UnitarySymmetric(np.eye(3, dtype=complex)))
        assert np.allclose(s.mat, 0.0)

    def test_scalar_minus_i(self):
        s = inverse_cayley(UnitarySymmetric(np.array([[-1j]])))
        assert abs(s.mat[0, 0] - 1.0) < 1e-14

    def test_round_trip_100_random(self, rng):
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(1, 7))
            s = _random_chart(rng, n, scale=1.5)
            u = cayley(s)
            back = inverse_cayley(u)
            again = cayley(back)
            worst = max(worst, float(np.max(np.abs(again.mat - u.mat))))
        assert worst < 1e-10

    def test_train_point_rejected(self):
        with pytest.raises(ChartDomainError, match="train"):
            inverse_cayley(UnitarySymmetric(np.diag([-1.0 + 0j, 1.0])))


class TestUnitaryFromFrame:
    def test_matches_cayley_of_chart(self, rng):
        for _ in range(10):
            frame = random_lagrangian_frame(rng, 3)
            u1 = unitary_from_frame(frame).mat
            u2 = cayley(chart_from_frame(frame)).mat
            assert np.max(np.abs(u1 - u2)) < 1e-9

    def test_defined_on_vertical_plane(self):
        from maslovflow import LagrangianFrame

        frame = LagrangianFrame(q=np.zeros((2, 2)), p=np.eye(2))
        u = unitary_from_frame(frame).mat
        assert np.allclose(u, -np.eye(2))


class TestRotatedCoefficients:
    def test_zero_blocks(self):
        coeffs = validate_coefficients(*[np.zeros((2, 2))] * 4)
        rot = rotated_coefficients(coeffs)
        assert np.allclose(rot.C, 0.0) and np.allclose(rot.D, 0.0)

    def test_b_identity_case(self):
        coeffs = validate_coefficients(np.zeros((2, 2)), np.eye(2),
                                       np.zeros((2, 2)), np.zeros((2, 2)))
        rot = rotated_coefficients(coeffs)
        assert np.allclose(rot.C, -0.5j * np.eye(2))
        assert np.allclose(rot.D, 0.5j * np.eye(2))

    def test_flow_consistency_by_finite_differences(self, rng):
        # d/dx Cay(s(x)) must match C + D u - u (D* + C* u) when ds/dx is the
        # chart Riccati RHS
        coeffs = _random_coeffs(rng, 3)
        rot = rotated_coefficients(coeffs)
        s0 = _random_chart(rng, 3, scale=0.7)
        rhs = riccati_rhs(s0, coeffs)
        h = 1e-5
        u_plus = cayley(SymmetricChart(s0.mat + h * rhs)).mat
        u_minus = cayley(SymmetricChart(s0.mat - h * rhs)).mat
        du_fd = (u_plus - u_minus) / (2 * h)
        u = cayley(s0).mat
        du = rot.C + rot.D @ u - u @ (np.conj(rot.D) + np.conj(rot.C) @ u)
        assert np.max(np.abs(du_fd - du)) < 1e-6


class TestXiField:
    def test_zero_c_gives_d(self, rng):
        # C vanishes when a is skew (so a = d) and c = -b
        m = rng.standard_normal((2, 2))
        a = 0.5 * (m - m.T)
        b = symmetrize(rng.standard_normal((2, 2)))
        coeffs = validate_coefficients(a, b, -b, -a.T)
        rot = rotated_coefficients(coeffs)
        assert np.max(np.abs(rot.C)) < 1e-15
        u = cayley(_random_chart(rng, 2)).mat
        xi = xi_field(UnitarySymmetric(u), rot).mat
        assert np.max(np.abs(xi - rot.D)) < 1e-12

    def test_u_identity_substitution(self, rng):
        coeffs = _random_coeffs(rng, 3)
        rot = rotated_coefficients(coeffs)
        xi = xi_field(UnitarySymmetric(np.eye(3, dtype=complex)), rot).mat
        expected = rot.D + 1j * np.imag(rot.C)
        assert np.max(np.abs(xi - expected)) < 1e-12

    def test_action_identity(self, rng):
        for _ in range(10):
            coeffs = _random_coeffs(rng, 3)
            rot = rotated_coefficients(coeffs)
            u = cayley(_random_chart(rng, 3)).mat
            xi = xi_field(UnitarySymmetric(u), rot).mat
            lhs = xi @ u - u @ np.conj(xi)
            rhs = rot.C + rot.D @ u - u @ (np.conj(rot.D) + np.conj(rot.C) @ u)
            assert np.max(np.abs(lhs - rhs)) < 1e-10


class TestDexpinv:
    def test_zero_sigma_is_identity(self, rng):
        n = 3
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        xi = SkewHermitian(0.5 * (a - a.conj().T))
        sigma = SkewHermitian(np.zeros((n, n), dtype=complex))
        for order in (0, 2, 8):
            assert np.allclose(dexpinv(sigma, xi, order).mat, xi.mat)

    def test_commuting_collapse(self):
        sigma = SkewHermitian(np.diag([1j, 2j]))
        xi = SkewHermitian(np.diag([0.5j, -0.7j]))
        assert np.allclose(dexpinv(sigma, xi, 8).mat, xi.mat)

    def test_order_two_matches_bracket_series(self, rng):
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        sigma = SkewHermitian(0.2 * (a - a.conj().T))
        b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        xi = SkewHermitian(0.5 * (b - b.conj().T))
        s, z = sigma.mat, xi.mat
        ad1 = s @ z - z @ s
        ad2 = s @ ad1 - ad1 @ s
        expected = z - 0.5 * ad1 + ad2 / 12.0
        assert np.max(np.abs(dexpinv(sigma, xi, 2).mat - expected)) < 1e-13

    def test_exponential_derivative_oracle(self, rng):
        # d/dt exp(sigma + t delta)|_0 = xi exp(sigma) when
        # delta = dexpinv(sigma, xi); check with central differences
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        sigma = SkewHermitian(0.15 * (a - a.conj().T))
        b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        xi = SkewHermitian(0.5 * (b - b.conj().T))
        delta = dexpinv(sigma, xi, 8).mat
        target = xi.mat @ mat_exp(sigma.mat)
        errors = []
        for h in (1e-2, 1e-3):
            fd = (mat_exp(sigma.mat + h * delta) - mat_exp(sigma.mat - h * delta)) / (2 * h)
            errors.append(float(np.max(np.abs(fd - target))))
        slope = np.log10(errors[0] / errors[1])
        assert slope > 1.8  # central-difference error is O(h^2)

    def test_order_bound(self, rng):
        sigma = SkewHermitian(np.zeros((2, 2), dtype=complex))
        with pytest.raises(ValueError):
            dexpinv(sigma, sigma, 9)


class TestEmkStep:
    def test_zero_field_fixed_point(self):
        from maslovflow import CoefficientField

        coeffs = validate_coefficients(*[np.zeros((2, 2))] * 4)
        field = CoefficientField(n=2, evaluate=lambda x, lam: coeffs,
                                 x_minus=-1, x_plus=1,
                                 farfield_minus=lambda lam: coeffs,
                                 farfield_plus=lambda lam: coeffs)
        u0 = UnitarySymmetric(np.eye(2, dtype=complex))
        sigma, u1 = emk_step(u0, 0.0, 0.1, field, 0.0)
        assert np.allclose(sigma.mat, 0.0)
        assert np.allclose(u1.mat, u0.mat)

    def test_commuting_diagonal_closed_form(self):
        # a = diag(w) with b = c = 0 gives C = 0, D = diag(w) real? use
        # b - c = 2w to get D = i diag(w): a = d = 0, b = w I, c = -w I
        from maslovflow import CoefficientField

        w = 0.3
        coeffs = validate_coefficients(np.zeros((1, 1)), np.array([[w]]),
                                       np.array([[-w]]), np.zeros((1, 1)))
        field = CoefficientField(n=1, evaluate=lambda x, lam: coeffs,
                                 x_minus=0, x_plus=10,
                                 farfield_minus=lambda lam: coeffs,
                                 farfield_plus=lambda lam: coeffs)
        u = UnitarySymmetric(np.eye(1, dtype=complex))
        h = 0.01
        for m in range(100):
            _, u = emk_step(u, m * h, h, field, 0.0)
        # each step multiplies by exp(2 i w h)
        expected = np.exp(2j * w * h * 100)
        assert abs(u.mat[0, 0] - expected) < 1e-12

    def test_one_step_refinement_order(self):
        field = kdv7_field()
        lam = 0.15
        frame = farfield_frame(field.farfield_minus(lam), "unstable")
        u0 = unitary_from_frame(frame)
        errors = []
        for h in (0.08, 0.04, 0.02):
            _, u_one = emk_step(u0, 0.0, h, field, lam)
            u_ref = u0
            nsub = 100
            for k in range(nsub):
                _, u_ref = emk_step(u_ref, k * h / nsub, h / nsub, field, lam)
            errors.append(float(np.max(np.abs(u_one.mat - u_ref.mat))))
        slopes = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(slopes > 0.8)  # observed order ~ 1


class TestIntegrateUnitary:
    def test_zero_field_constant_theta(self):
        from maslovflow import CoefficientField

        coeffs = validate_coefficients(*[np.zeros((2, 2))] * 4)
        field = CoefficientField(n=2, evaluate=lambda x, lam: coeffs,
                                 x_minus=0, x_plus=1,
                                 farfield_minus=lambda lam: coeffs,
                                 farfield_plus=lambda lam: coeffs)
        u0 = UnitarySymmetric(np.eye(2, dtype=complex))
        path = integrate_unitary(field, 0.0, np.linspace(0, 1, 51), u0)
        assert np.allclose(path.theta_trace.theta, 0.0)

    @pytest.mark.parametrize("lam,count", [(-5.0, 0), (-2.0, 1), (-0.5, 2)])
    def test_poschl_teller_net_winding_matches_crossings(self, lam, count):
        # the endpoints of theta are pinned by the far-field fixed points, so
        # the net winding is 2 pi per crossing
        field = poschl_teller_field(2)
        grid = np.linspace(-20, 20, 4001)
        u0 = unitary_from_frame(farfield_frame(field.farfield_minus(lam), "unstable"))
        path = integrate_unitary(field, lam, grid, u0)
        theta = path.theta_trace.theta
        from maslovflow import detect_crossings

        crossings = detect_crossings(path)
        assert sum(c.multiplicity for c in crossings) == count
        winding = (theta[-1] - theta[0]) / (2 * np.pi)
        assert abs(winding - count) < 0.2

    def test_kdv7_sigma_steps_bounded(self):
        field = kdv7_field()
        lam = 0.15
        grid = np.linspace(-20, 20, 4001)
        h = grid[1] - grid[0]
        u0 = unitary_from_frame(farfield_frame(field.farfield_minus(lam), "unstable"))
        path = integrate_unitary(field, lam, grid, u0)
        worst = 0.0
        for m in range(0, 4000, 97):
            sigma, _ = emk_step(UnitarySymmetric(path.us[m]), grid[m], h, field, lam)
            worst = max(worst, float(np.max(np.abs(sigma.mat))))
        assert worst < 10.0 * h

    def test_drift_and_circle_consistency(self):
        field = kdv7_field()
        grid = np.linspace(-20, 20, 10_001)
        u0 = unitary_from_frame(farfield_frame(field.farfield_minus(0.15), "unstable"))
        path = integrate_unitary(field, 0.15, grid, u0, reproject=False)
        assert path.max_unitarity_defect < 1e-9
        assert path.max_symmetry_defect < 1e-9
        assert path.max_circle_defect < 1e-7
        assert path.reprojected_steps == 0

    def test_theta0_default_is_principal(self):
        field = poschl_teller_field(2)
        u0 = unitary_from_frame(farfield_frame(field.farfield_minus(-3.0), "unstable"))
        path = integrate_unitary(field, -3.0, np.linspace(-20, 20, 501), u0)
        assert -np.pi < path.theta_trace.theta0 <= np.pi
        assert abs(np.exp(1j * path.theta_trace.theta0) - np.linalg.det(u0.mat)) < 1e-12

    def test_theta_trace_rejects_big_steps(self):
        with pytest.raises(StepSizeError):
            ThetaTrace(grid=np.array([0.0, 1.0]), theta=np.array([0.0, 4.0]), theta0=0.0)


class TestThetaFromChart:
    def test_matches_unitary_route_mod_2pi(self):
        field = poschl_teller_field(2)
        lam = -2.0
        grid = np.linspace(-20, 20, 4001)
        frame = farfield_frame(field.farfield_minus(lam), "unstable")
        cpath = integrate_chart(field, lam, grid, chart_from_frame(frame))
        upath = integrate_unitary(field, lam, grid, unitary_from_frame(frame))
        t_chart = theta_from_chart(cpath).theta
        t_unit = upath.theta_trace.theta
        # same angle up to a global 2 pi multiple and the O(h) method gap
        diff = (t_chart - t_unit) - (t_chart[0] - t_unit[0])
        assert np.max(np.abs(diff)) < 0.05
