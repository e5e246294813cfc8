import math

import numpy as np
import pytest

from parastab import (Grid, QuadratureRule, RangeError, ScalarField,
                      StepControl, assemble_linearized, blend, curve_length,
                      curve_length_from_runs, fd_sensitivity,
                      fitted_growth_constant, full_region, interval, lp_norm,
                      make_problem, sensitivity_runs, solve, solve_sensitivity)
from parastab.grid import gradient_values, laplacian_values

GRID = Grid(1, 1.0, 64)
CONTROL = StepControl(cfl_fraction=0.4, store_every=1)


def prob(spec, grid=GRID):
    return make_problem(grid, spec)


HEAT_SINE = {"family": "heat", "a0": 1.0, "initial": {"kind": "sine"}}
HEAT_BUMP = {"family": "heat", "a0": 1.0,
             "initial": {"kind": "bump", "amplitude": 0.8, "kappa": 4.0}}
TRIG = {"family": "trig_coefficients", "a0": 1.0, "eps_a": 0.2, "c": 0.3,
        "d": 0.1, "r0": 0.1, "r1": 0.2, "initial": {"kind": "sine"}}
POLY = {"family": "poly_diffusion", "a0": 1.0, "eps": 0.3, "c": 0.2,
        "initial": {"kind": "two_mode", "a1": 0.7, "k1": 1, "a2": 0.3, "k2": 2}}
GRAD = {"family": "gradient_diffusion", "a0": 1.2, "eps": 0.4, "r2": 0.3,
        "initial": {"kind": "sine"}}


class TestBlend:
    def sample_args(self, dim=1, n=200, seed=11):
        rng = np.random.default_rng(seed)
        t = rng.uniform(0, 1, n)
        x = tuple(rng.uniform(0, 1, n) for _ in range(dim))
        u = rng.uniform(-1, 1, n)
        q = tuple(rng.uniform(-3, 3, n) for _ in range(dim))
        return t, x, u, q

    def coeff_values(self, problem, args):
        t, x, u, q = args
        c = problem.coeffs
        return np.concatenate([
            np.broadcast_to(np.asarray(c.a(t, x, u, q), float), t.shape),
            np.broadcast_to(np.asarray(c.h(t, x, u, q), float), t.shape),
            np.broadcast_to(np.asarray(c.div_x_f(t, x, u), float), t.shape),
            np.concatenate([np.broadcast_to(np.asarray(v, float), t.shape)
                            for v in c.f_u(t, x, u)]),
        ])

    def test_endpoints_evaluate_exactly(self):
        P, Q = prob(TRIG), prob(POLY)
        args = self.sample_args()
        np.testing.assert_array_equal(
            self.coeff_values(blend(P, Q, 1.0), args), self.coeff_values(P, args))
        np.testing.assert_array_equal(
            self.coeff_values(blend(P, Q, 0.0), args), self.coeff_values(Q, args))

    def test_blend_of_equal_problems_is_identity(self):
        P = prob(TRIG)
        args = self.sample_args()
        for theta in (0.25, 0.5, 0.9):
            np.testing.assert_allclose(
                self.coeff_values(blend(P, P, theta), args),
                self.coeff_values(P, args), rtol=1e-15)

    def test_endpoint_trajectories_match_direct_solves(self):
        # identical discrete right-hand sides: sup gap at most 1e-12
        pairs = [(HEAT_SINE, HEAT_BUMP), (TRIG, POLY), (GRAD, HEAT_SINE)]
        T = 0.01
        for spec_p, spec_q in pairs:
            P, Q = prob(spec_p), prob(spec_q)
            direct_p = solve(P, GRID, T, CONTROL)
            direct_q = solve(Q, GRID, T, CONTROL)
            via_one = solve(blend(P, Q, 1.0), GRID, T, CONTROL)
            via_zero = solve(blend(P, Q, 0.0), GRID, T, CONTROL)
            assert float(np.max(np.abs(via_one.values - direct_p.values))) <= 1e-12
            assert float(np.max(np.abs(via_zero.values - direct_q.values))) <= 1e-12

    def test_theta_out_of_range(self):
        P, Q = prob(HEAT_SINE), prob(HEAT_BUMP)
        with pytest.raises(RangeError):
            blend(P, Q, 1.5)

    def test_initial_data_blended(self):
        P, Q = prob(HEAT_SINE), prob(HEAT_BUMP)
        b = blend(P, Q, 0.3)
        want = 0.3 * P.initial_values(GRID) + 0.7 * Q.initial_values(GRID)
        np.testing.assert_allclose(b.initial_values(GRID), want, rtol=1e-15)


class TestAssembleLinearized:
    def test_identical_pair_zero_forcing(self):
        P = prob(TRIG)
        u = ScalarField(GRID, P.initial_values(GRID))
        lin = assemble_linearized(P, P, 0.37, u, 0.0)
        assert lin.sigma.sup_norm() == 0.0

    def test_constant_diffusion_pair(self):
        a0, b0, theta = 1.0, 1.4, 0.3
        P = prob({"family": "heat", "a0": a0, "initial": {"kind": "sine"}})
        Q = prob({"family": "heat", "a0": b0, "initial": {"kind": "sine"}})
        u = ScalarField(GRID, P.initial_values(GRID))
        lin = assemble_linearized(P, Q, theta, u, 0.0)
        np.testing.assert_allclose(lin.alpha.values, theta * a0 + (1 - theta) * b0)
        for comp in lin.beta.components:
            assert np.max(np.abs(comp)) == 0.0
        assert lin.gamma.sup_norm() == 0.0
        lap = laplacian_values(u.values, GRID.dx)
        np.testing.assert_allclose(lin.sigma.values, (a0 - b0) * lap, rtol=1e-12)

    def test_against_independent_summand_evaluation(self):
        # oracle: each summand recomputed directly from the coefficient
        # callables at 50 random cells
        P, Q = prob(GRAD), prob(TRIG)
        theta = 0.6
        rng = np.random.default_rng(3)
        u = ScalarField(GRID, 0.5 * np.sin(2 * math.pi * GRID.axis_centers())
                        + 0.1 * rng.standard_normal(GRID.shape))
        t = 0.2
        lin = assemble_linearized(P, Q, theta, u, t)
        lap = laplacian_values(u.values, GRID.dx)
        grad = gradient_values(u.values, GRID.dx)
        x = GRID.coords()
        cp, cq = P.coeffs, Q.coeffs
        cells = rng.integers(0, GRID.cells, 50)
        th1 = 1 - theta
        for i in cells:
            xi = (x[0][i:i + 1],)
            ui = u.values[i:i + 1]
            qi = (grad[0][i:i + 1],)
            alpha_i = theta * cp.a(t, xi, ui, qi) + th1 * cq.a(t, xi, ui, qi)
            beta_i = (
                (theta * cp.a_q(t, xi, ui, qi)[0] + th1 * cq.a_q(t, xi, ui, qi)[0]) * lap[i]
                + theta * cp.f_u(t, xi, ui)[0] + th1 * cq.f_u(t, xi, ui)[0]
                + theta * cp.h_q(t, xi, ui, qi)[0] + th1 * cq.h_q(t, xi, ui, qi)[0]
            )
            gamma_i = (
                (theta * cp.a_u(t, xi, ui, qi) + th1 * cq.a_u(t, xi, ui, qi)) * lap[i]
                + theta * cp.div_x_f_u(t, xi, ui) + th1 * cq.div_x_f_u(t, xi, ui)
                + theta * cp.h_u(t, xi, ui, qi) + th1 * cq.h_u(t, xi, ui, qi)
                + (theta * cp.f_uu(t, xi, ui)[0] + th1 * cq.f_uu(t, xi, ui)[0]) * grad[0][i]
            )
            sigma_i = (
                (cp.a(t, xi, ui, qi) - cq.a(t, xi, ui, qi)) * lap[i]
                + (cp.f_u(t, xi, ui)[0] - cq.f_u(t, xi, ui)[0]) * grad[0][i]
                + cp.div_x_f(t, xi, ui) - cq.div_x_f(t, xi, ui)
                + cp.h(t, xi, ui, qi) - cq.h(t, xi, ui, qi)
            )
            assert lin.alpha.values[i] == pytest.approx(float(np.asarray(alpha_i).ravel()[0]), rel=1e-12)
            assert lin.beta.components[0][i] == pytest.approx(float(np.asarray(beta_i).ravel()[0]), rel=1e-12)
            assert lin.gamma.values[i] == pytest.approx(float(np.asarray(gamma_i).ravel()[0]), rel=1e-12, abs=1e-15)
            assert lin.sigma.values[i] == pytest.approx(float(np.asarray(sigma_i).ravel()[0]), rel=1e-12, abs=1e-15)

    def test_alpha_floor(self):
        P, Q = prob({"family": "heat", "a0": 0.5}), prob({"family": "heat", "a0": 2.0})
        u = ScalarField(GRID, P.initial_values(GRID))
        for theta in (0.0, 0.3, 1.0):
            lin = assemble_linearized(P, Q, theta, u, 0.0)
            assert float(np.min(lin.alpha.values)) >= 0.5


class TestSolveSensitivity:
    def test_identical_pair_zero_sensitivity(self):
        P = prob(TRIG)
        run = solve_sensitivity(P, P, 0.5, GRID, 0.01, CONTROL)
        assert run.z_trajectory.sup_norm() == 0.0

    def test_shared_time_grid(self):
        P, Q = prob(TRIG), prob(HEAT_SINE)
        run = solve_sensitivity(P, Q, 0.25, GRID, 0.01, StepControl(store_every=5))
        assert np.array_equal(run.u_trajectory.times, run.z_trajectory.times)

    def test_equal_coefficients_heat_evolution_of_data_gap(self):
        # oracle: z solves the heat equation with data phi - psi and does
        # not depend on theta
        P, Q = prob(HEAT_SINE), prob(HEAT_BUMP)
        T = 0.02
        z_fields = []
        for theta in (0.2, 0.8):
            run = solve_sensitivity(P, Q, theta, GRID, T, CONTROL)
            z_fields.append(run.z_trajectory.values[-1])
        np.testing.assert_allclose(z_fields[0], z_fields[1], atol=1e-12)
        # compare against directly evolving the initial gap
        gap = ScalarField(GRID, P.initial_values(GRID) - Q.initial_values(GRID))
        from parastab import TimeField, TimeVectorField, solve_linear
        direct = solve_linear(
            TimeField.constant(1.0, T), TimeVectorField.constant((0.0,), T),
            TimeField.constant(0.0, T), TimeField.constant(0.0, T),
            gap, T, CONTROL,
        )
        np.testing.assert_allclose(z_fields[0], direct.values[-1], atol=1e-10)


class TestFdSensitivity:
    def test_identical_pair_zero(self):
        P = prob(POLY)
        out = fd_sensitivity(P, P, 0.5, 0.1, GRID, CONTROL, 0.01)
        assert out.sup_norm() < 1e-12

    def test_linear_theta_dependence_delta_free(self):
        # identical coefficients, different data: u_theta is affine in theta,
        # so the centered difference is exact in delta
        P, Q = prob(HEAT_SINE), prob(HEAT_BUMP)
        t = 0.01
        outs = [fd_sensitivity(P, Q, 0.5, d, GRID, CONTROL, t).values
                for d in (0.2, 0.05)]
        np.testing.assert_allclose(outs[0], outs[1], atol=1e-10)
        run = solve_sensitivity(P, Q, 0.5, GRID, t, CONTROL)
        np.testing.assert_allclose(outs[1], run.z_trajectory.values[-1], atol=1e-8)

    def test_richardson_slope_against_linearized(self):
        # the gap to the linearized solve shrinks at second order in delta
        # until the spatial floor
        P, Q = prob({"family": "heat", "a0": 1.0, "initial": {"kind": "sine"}}), \
            prob({"family": "heat", "a0": 1.35, "initial": {"kind": "sine"}})
        t = 0.03
        run = solve_sensitivity(P, Q, 0.5, GRID, t, CONTROL)
        z = run.z_trajectory.values[-1]
        deltas = [0.1, 0.05, 0.025]
        errs = [float(np.max(np.abs(fd_sensitivity(P, Q, 0.5, d, GRID, CONTROL, t).values - z)))
                for d in deltas]
        slope = np.polyfit(np.log(deltas), np.log(errs), 1)[0]
        assert 1.7 <= slope <= 2.3

    def test_range_check(self):
        P, Q = prob(HEAT_SINE), prob(HEAT_BUMP)
        with pytest.raises(RangeError):
            fd_sensitivity(P, Q, 0.05, 0.1, GRID, CONTROL, 0.01)


class TestQuadratureRule:
    def test_gauss_legendre_weights(self):
        for n in (4, 8, 16):
            rule = QuadratureRule.gauss_legendre(n)
            assert abs(sum(rule.weights) - 1.0) <= 1e-14
            assert list(rule.nodes) == sorted(rule.nodes)
            assert all(0 < x < 1 for x in rule.nodes)

    def test_polynomial_exactness(self):
        rule = QuadratureRule.gauss_legendre(8)
        for k in range(14):
            got = sum(w * x ** k for x, w in zip(rule.nodes, rule.weights))
            assert got == pytest.approx(1.0 / (k + 1), rel=1e-13)

    def test_invalid_rules(self):
        with pytest.raises(ValueError):
            QuadratureRule((0.5, 0.2), (0.5, 0.5))
        with pytest.raises(ValueError):
            QuadratureRule((0.2, 0.5), (0.7, 0.7))


class TestCurveLength:
    def test_trivial_pair_zero_length(self):
        P = prob(HEAT_SINE)
        E = interval(GRID, 0.5, 0.5)
        assert curve_length(P, P, E, 2.0, 0.01, control=CONTROL) == 0.0

    def test_equality_for_identical_heat_pair(self):
        # theta-independent sensitivity: the curve is a straight segment and
        # the length equals the endpoint distance
        P, Q = prob(HEAT_SINE), prob(HEAT_BUMP)
        T = 0.02
        rule = QuadratureRule.gauss_legendre(8)
        runs = sensitivity_runs(P, Q, GRID, T, CONTROL, rule)
        u = solve(P, GRID, T, CONTROL)
        v = solve(Q, GRID, T, CONTROL)
        for p in (1.0, 2.0, 4.0):
            for E in (interval(GRID, 0.5, 0.5), full_region(GRID)):
                for t in (0.01, T):
                    dist = lp_norm(ScalarField(GRID, u.at(t) - v.at(t)), E, p)
                    length = curve_length_from_runs(runs, rule, E, p, t)
                    assert length == pytest.approx(dist, rel=1e-9, abs=1e-12)

    def test_curve_length_dominates_distance(self):
        P, Q = prob(TRIG), prob(POLY)
        T = 0.02
        rule = QuadratureRule.gauss_legendre(8)
        runs = sensitivity_runs(P, Q, GRID, T, CONTROL, rule)
        u = solve(P, GRID, T, CONTROL)
        v = solve(Q, GRID, T, CONTROL)
        E = interval(GRID, 0.5, 0.5)
        for p in (1.0, 2.0, 4.0):
            for t in (0.005, 0.01, T):
                dist = lp_norm(ScalarField(GRID, u.at(t) - v.at(t)), E, p)
                length = curve_length_from_runs(runs, rule, E, p, t)
                assert dist <= length + 1e-4 * (dist + length) + 1e-12

    def test_threaded_evaluation_deterministic(self):
        P, Q = prob(TRIG), prob(HEAT_SINE)
        T = 0.01
        rule = QuadratureRule.gauss_legendre(4)
        seq = sensitivity_runs(P, Q, GRID, T, CONTROL, rule, threads=1)
        par = sensitivity_runs(P, Q, GRID, T, CONTROL, rule, threads=4)
        E = interval(GRID, 0.5, 0.5)
        a = curve_length_from_runs(seq, rule, E, 2.0, T)
        b = curve_length_from_runs(par, rule, E, 2.0, T)
        assert a == b


class TestGrowthConstant:
    def test_decaying_pair_zero_constant(self):
        P, Q = prob(HEAT_SINE), prob(HEAT_BUMP)
        rule = QuadratureRule.gauss_legendre(4)
        runs = sensitivity_runs(P, Q, GRID, 0.02, StepControl(store_every=20), rule)
        z0_sup = float(np.max(np.abs(P.initial_values(GRID) - Q.initial_values(GRID))))
        c1 = fitted_growth_constant(runs, z0_sup)
        assert c1 == 0.0  # pure diffusion only shrinks the gap

    def test_forced_pair_positive_finite(self):
        P, Q = prob(TRIG), prob(HEAT_SINE)
        rule = QuadratureRule.gauss_legendre(4)
        runs = sensitivity_runs(P, Q, GRID, 0.02, StepControl(store_every=20), rule)
        c1 = fitted_growth_constant(runs, 0.0)
        assert np.isfinite(c1) and c1 > 0
