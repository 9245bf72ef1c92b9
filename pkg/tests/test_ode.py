"""Closed five-component system: vector field, invariant region, integration."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amyprion import ode, stability
from amyprion.model import Parameters, RateModel
from conftest import draw_params

# root of the all-ones (n=1) equilibrium polynomial, frozen from an
# independent bisection of 1 - 2x - 2x^2 - x^3/2
U_INF = 0.3593040859717764
P_INF = 0.8477075981395666
B_INF = 0.1522924018604334
M_INF = 0.4884035121677900


class TestRhs:
    def test_origin(self, all_ones):
        params, rates = all_ones
        d = ode.rhs(np.zeros(5), params, rates)
        assert d == (0.0, params.lambda_u, params.lambda_p, 0.0, 0.0)

    def test_all_ones_state(self, all_ones):
        params, rates = all_ones
        d = ode.rhs(np.ones(5), params, rates)
        assert d.A == pytest.approx(0.0)
        assert d.u == pytest.approx(-2.0)
        assert d.p == pytest.approx(0.0)
        assert d.b == pytest.approx(-1.0)
        assert d.M == pytest.approx(1.0)

    def test_vanishes_at_steady_state(self, all_ones):
        params, rates = all_ones
        ss = stability.find_steady_state(params, rates)
        d = ode.rhs(np.array(ss.as_state()), params, rates)
        assert max(abs(v) for v in d[:4]) < 1e-12

    def test_rejects_power_law_rates(self, all_ones):
        params, _ = all_ones
        rates = RateModel.power_law(c=1.0, theta=0.5, mu0=1.0)
        with pytest.raises(ValueError):
            ode.rhs(np.zeros(5), params, rates)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000), axis=st.integers(0, 3))
    def test_quasi_positivity(self, seed, axis):
        # with one coordinate pinned at zero, its derivative never points out
        rng = np.random.default_rng(seed)
        params, rates = draw_params(rng)
        y = rng.uniform(0.0, 3.0, size=5)
        y[axis] = 0.0
        d = ode.rhs(y, params, rates)
        assert d[axis] >= 0.0


class TestStableSet:
    def test_bound_formula(self, all_ones):
        params, rates = all_ones
        y0 = np.array([0.2, 0.3, 0.4, 0.5, 0.0])
        # n A + u + p + 2b + (lambda_u + lambda_p)/min(mu, gamma_u, gamma_p, delta)
        expect = 0.2 + 0.3 + 0.4 + 1.0 + 2.0
        assert ode.stable_set_bound(y0, params, rates) == pytest.approx(expect)

    def test_weighted_total(self):
        y = np.array([1.0, 2.0, 3.0, 4.0, 9.0])
        assert ode.weighted_total(y, 3) == pytest.approx(3 + 2 + 3 + 8)

    def test_trajectory_stays_inside(self, all_ones):
        params, rates = all_ones
        traj = ode.integrate(np.zeros(5), params, rates, 50.0)
        bound = ode.stable_set_bound(np.zeros(5), params, rates)
        totals = [ode.weighted_total(y, params.n) for y in traj.states]
        assert max(totals) <= bound * (1 + 1e-9)
        assert traj.step_stats.max_stable_set_excess <= 0.0


class TestIntegrate:
    def test_reaches_steady_state(self, all_ones):
        params, rates = all_ones
        traj = ode.integrate(np.zeros(5), params, rates, 100.0, tol=1e-10)
        final = np.array(traj.final)
        target = np.array([U_INF, U_INF, P_INF, B_INF, M_INF])
        assert np.max(np.abs(final - target)) < 1e-6

    def test_zero_coupling_keeps_plaques_zero(self, all_ones):
        params, rates = all_ones
        p = params.replace(alpha=0.0)
        traj = ode.integrate(np.zeros(5), p, rates, 30.0)
        assert np.max(np.abs(traj.column("A"))) == 0.0
        assert np.max(np.abs(traj.column("M"))) == 0.0
        # u approaches the reduced equilibrium (alpha = 0)
        ss = stability.find_steady_state(p, rates)
        assert traj.final.u == pytest.approx(ss.u_inf, abs=1e-6)

    def test_states_never_negative(self, all_ones):
        params, rates = all_ones
        traj = ode.integrate(np.zeros(5), params, rates, 20.0)
        assert np.min(traj.states) >= 0.0

    def test_zero_span(self, all_ones):
        params, rates = all_ones
        y0 = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        traj = ode.integrate(y0, params, rates, 0.0)
        assert len(traj.times) == 1
        assert np.all(traj.states[0] == y0)

    def test_rejects_negative_initial(self, all_ones):
        params, rates = all_ones
        with pytest.raises(ValueError):
            ode.integrate([-0.1, 0, 0, 0, 0], params, rates, 1.0)

    def test_convergence_with_tolerance(self, all_ones):
        # halving tol must not increase the terminal error vs a tight reference
        params, rates = all_ones
        ref = np.array(ode.integrate(np.zeros(5), params, rates, 10.0, tol=1e-12).final)
        errs = []
        for tol in (1e-5, 1e-7, 1e-9):
            got = np.array(ode.integrate(np.zeros(5), params, rates, 10.0, tol=tol).final)
            errs.append(np.max(np.abs(got - ref)))
        assert errs[0] > errs[2]

    def test_fixed_step_order(self, all_ones):
        # straight fifth-order weights on the same vector field
        params, rates = all_ones
        from amyprion import rk

        fun = ode.rhs_function(params, rates)
        y0 = np.array([0.1, 0.5, 0.5, 0.1, 0.1])
        ref = rk.solve(fun, 0.0, y0, 2.0, rtol=1e-13, atol=1e-14).y[-1]
        errs = []
        for n in (20, 40):
            got = rk.solve_fixed(fun, 0.0, y0, 2.0, n).y[-1]
            errs.append(np.max(np.abs(got - ref)))
        assert errs[0] / errs[1] > 2**4

    def test_sampling_and_columns(self, all_ones):
        params, rates = all_ones
        traj = ode.integrate(np.zeros(5), params, rates, 5.0)
        out = traj.sample(np.array([0.0, 1.0, 4.5]))
        assert out.shape == (3, 5)
        assert np.all(out[0] == 0.0)
        assert traj.column("u").shape == traj.times.shape
        st = traj.state_at(3)
        assert st.u == traj.states[3, 1]


class TestTrajectoryCsv:
    def test_round_trip_precision(self, tmp_path, all_ones):
        params, rates = all_ones
        traj = ode.integrate(np.zeros(5), params, rates, 3.0)
        path = tmp_path / "traj.csv"
        ode.write_trajectory_csv(path, traj)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert data.shape == (len(traj.times), 6)
        assert np.array_equal(data[:, 0], traj.times)
        assert np.array_equal(data[:, 1:], traj.states)

    def test_header(self, tmp_path, all_ones):
        params, rates = all_ones
        traj = ode.integrate(np.zeros(5), params, rates, 1.0)
        path = tmp_path / "traj.csv"
        ode.write_trajectory_csv(path, traj)
        assert path.read_text().splitlines()[0] == "t,A,u,p,b,M"
