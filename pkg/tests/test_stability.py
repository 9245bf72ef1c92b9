"""Equilibrium location, linearization, Routh-Hurwitz certificates."""

import math

import numpy as np
import pytest

from amyprion import ode, stability
from amyprion.model import Parameters, RateModel
from conftest import draw_params

U_INF = 0.3593040859717764  # bisection oracle, all-ones n=1


class TestQPolynomial:
    def test_value_at_zero(self, all_ones):
        params, rates = all_ones
        assert stability.q_evaluate(0.0, params, rates) == pytest.approx(
            params.gamma_p * params.lambda_u
        )

    def test_hand_evaluated_point(self, all_ones):
        # P(0.3) = 0.3 + 2*0.09 + 0.5*0.027 summed monomial by monomial
        params, rates = all_ones
        assert stability.q_evaluate(0.3, params, rates) == pytest.approx(0.2065, abs=1e-12)

    def test_value_at_one(self, all_ones):
        params, rates = all_ones
        assert stability.q_evaluate(1.0, params, rates) == pytest.approx(-3.5, abs=1e-12)

    def test_derivative_matches_finite_difference(self, all_ones):
        params, rates = all_ones
        h = 1e-6
        for x in (0.1, 0.5, 2.0):
            fd = (stability.q_evaluate(x + h, params, rates)
                  - stability.q_evaluate(x - h, params, rates)) / (2 * h)
            assert stability.q_derivative(x, params, rates) == pytest.approx(fd, rel=1e-6)

    def test_single_sign_change(self, all_ones):
        # dense sampling on [0, 10 u_inf]: exactly one sign change
        params, rates = all_ones
        xs = np.linspace(0.0, 10 * U_INF, 10_000)
        vals = np.array([stability.q_evaluate(x, params, rates) for x in xs])
        signs = np.sign(vals)
        changes = np.sum(signs[1:] != signs[:-1])
        assert changes == 1


class TestFindSteadyState:
    def test_all_ones_oracle(self, all_ones):
        params, rates = all_ones
        ss = stability.find_steady_state(params, rates)
        assert ss.u_inf == pytest.approx(U_INF, abs=1e-12)
        assert ss.A_inf == pytest.approx(U_INF, abs=1e-12)
        assert ss.p_inf == pytest.approx(0.8477075981395666, abs=1e-12)
        assert ss.b_inf == pytest.approx(0.1522924018604334, abs=1e-12)
        assert ss.m_inf == pytest.approx(0.4884035121677900, abs=1e-12)
        assert ss.tau_star == pytest.approx(0.5)
        assert ss.a_coeff == pytest.approx(-1.0)
        assert ss.residual < 1e-12

    def test_binding_identity(self, all_ones):
        # tau u p = (delta + sigma) b at the root
        params, rates = all_ones
        ss = stability.find_steady_state(params, rates)
        lhs = params.tau * ss.u_inf * ss.p_inf
        rhs = (params.delta + params.sigma) * ss.b_inf
        assert lhs == pytest.approx(rhs, abs=1e-14)

    def test_alpha_zero_regime(self, all_ones):
        params, rates = all_ones
        ss = stability.find_steady_state(params.replace(alpha=0.0), rates)
        assert ss.A_inf == 0.0
        assert ss.m_inf == 0.0
        # Q reduces to 1 - x - x^2/2 with root sqrt(3) - 1
        assert ss.u_inf == pytest.approx(math.sqrt(3.0) - 1.0, abs=1e-12)

    def test_bracket_contains_root(self, all_ones):
        params, rates = all_ones
        ss = stability.find_steady_state(params, rates)
        lo, hi = ss.q_root_bracket
        assert lo <= ss.u_inf <= hi

    def test_random_draws_residuals(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            params, rates = draw_params(rng)
            ss = stability.find_steady_state(params, rates)
            assert ss.residual < 1e-8
            e217 = abs(params.tau * ss.u_inf * ss.p_inf
                       - (params.delta + params.sigma) * ss.b_inf)
            assert e217 < 1e-8

    def test_rhs_vanishes_at_report(self, all_ones):
        params, rates = all_ones
        ss = stability.find_steady_state(params, rates)
        d = ode.rhs(np.array(ss.as_state()), params, rates)
        assert max(abs(v) for v in d) < 1e-12


class TestJacobian:
    def test_structure(self, all_ones):
        params, rates = all_ones
        ss = stability.find_steady_state(params, rates)
        D = stability.jacobian_at(ss, params, rates)
        assert D.shape == (4, 4)
        # sparsity: A does not feed p or b directly
        assert D[2, 0] == 0.0
        assert D[3, 0] == 0.0
        assert D[0, 2] == 0.0
        assert D[0, 3] == 0.0
        # degradation terms on the diagonal are negative
        assert np.all(np.diag(D) < 0.0)

    def test_matches_finite_difference(self, all_ones):
        params, rates = all_ones
        ss = stability.find_steady_state(params, rates)
        D = stability.jacobian_at(ss, params, rates)
        fun = ode.rhs_function(params, rates)
        y0 = np.array(ss.as_state())
        h = 1e-7
        for j in range(4):
            e = np.zeros(5)
            e[j] = h
            col = (np.asarray(fun(0.0, y0 + e)) - np.asarray(fun(0.0, y0 - e))) / (2 * h)
            assert np.allclose(D[:, j], col[:4], atol=1e-6)

    def test_trace_is_minus_a1(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            params, rates = draw_params(rng)
            ss = stability.find_steady_state(params, rates)
            D = stability.jacobian_at(ss, params, rates)
            a1, _, _, _ = stability.characteristic_coefficients(ss, params, rates)
            assert np.trace(D) == pytest.approx(-a1, rel=1e-12)


class TestCharacteristicCoefficients:
    def test_all_ones_a1(self, all_ones):
        params, rates = all_ones
        ss = stability.find_steady_state(params, rates)
        a1, a2, a3, a4 = stability.characteristic_coefficients(ss, params, rates)
        assert a1 == pytest.approx(7.566315770083119, abs=1e-12)
        assert min(a1, a2, a3, a4) > 0.0

    def test_matches_eigen_expansion(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            params, rates = draw_params(rng)
            ss = stability.find_steady_state(params, rates)
            D = stability.jacobian_at(ss, params, rates)
            coeffs = stability.characteristic_coefficients(ss, params, rates)
            poly = np.poly(D)  # [1, a1, a2, a3, a4]
            for got, want in zip(coeffs, poly[1:]):
                assert got == pytest.approx(want, rel=1e-8)


class TestRouthHurwitz:
    def test_synthetic_fragment(self):
        frag = stability.routh_hurwitz((1.0, 1.0, 1.0, 1.0))
        assert frag.margin == pytest.approx(-1.0)
        assert not frag.stable

    def test_all_ones_stable(self, all_ones):
        params, rates = all_ones
        rep = stability.stability_report(params, rates)
        assert rep.rh_margin > 0.0
        assert rep.locally_stable
        assert np.all(rep.eigen_real_parts < -1e-10)

    def test_universal_over_draws(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            params, rates = draw_params(rng)
            rep = stability.stability_report(params, rates)
            assert min(rep.a1, rep.a2, rep.a3, rep.a4) > 0.0
            assert rep.rh_margin > 0.0
            assert np.max(rep.eigen_real_parts) < -1e-10

    def test_margin_formula(self):
        a = (2.0, 3.0, 1.5, 0.25)
        frag = stability.routh_hurwitz(a)
        expect = a[0] * a[1] * a[2] - a[2] ** 2 - a[0] ** 2 * a[3]
        assert frag.margin == pytest.approx(expect)

    def test_eigen_real_parts_sorted(self, all_ones):
        params, rates = all_ones
        rep = stability.stability_report(params, rates)
        assert np.all(np.diff(rep.eigen_real_parts) >= 0.0)
