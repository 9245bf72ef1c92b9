"""Diagnostic battery: balance laws, containment, solver cross-checks."""

import numpy as np
import pytest

from amyprion import checks, ode, pde
from amyprion.checks import (
    CheckReport,
    contraction_gap_check,
    mass_estimate_check,
    moment_closure_check,
    oligomer_balance,
    prion_balance,
    run_all,
    stable_set_check,
)
from amyprion.model import Parameters, RateModel


@pytest.fixture
def params():
    return Parameters(lambda_u=1, gamma_u=1, lambda_p=1, gamma_p=1,
                      tau=1, sigma=1, delta=1, alpha=1, n=1, epsilon=1)


@pytest.fixture
def rates():
    return RateModel.constant(rho0=1.0, mu0=1.0)


def coupled_run(params, rates, n_steps=None, cells=900, T=0.4):
    g = pde.PlaqueGrid.uniform(1.0, 12.0, cells, pde.exp_decay_density(1.0, 1.0, 1.0))
    state = pde.CoupledState(grid=g, u=1.0, p=1.0, b=0.5)
    return pde.simulate_coupled(state, T, params, rates, n_steps=n_steps), state


class TestCheckReport:
    def test_pass_fail_boundary(self):
        ok = CheckReport("x", 1e-9, 1e-6, True, {})
        bad = CheckReport("x", 1e-3, 1e-6, False, {})
        assert "[ok]" in str(ok)
        assert "[FAIL]" in str(bad)
        assert "max_violation" in str(ok)


class TestPrionBalance:
    def test_ode_trajectory_passes(self, params, rates):
        traj = ode.integrate(np.array([0.0, 1.0, 1.0, 1.0, 0.0]),
                             params, rates, 10.0, tol=1e-9)
        rep = prion_balance(traj, params)
        assert rep.passed

    def test_grid_run_passes(self, params, rates):
        run, _ = coupled_run(params, rates)
        assert prion_balance(run, params).passed

    def test_residual_second_order_in_dt(self, params, rates):
        coarse, _ = coupled_run(params, rates, n_steps=500)
        fine, _ = coupled_run(params, rates, n_steps=1000)
        r1 = prion_balance(coarse, params).max_violation
        r2 = prion_balance(fine, params).max_violation
        assert r1 / r2 > 3.0


class TestStableSet:
    def test_from_origin(self, params, rates):
        traj = ode.integrate(np.zeros(5), params, rates, 30.0, tol=1e-9)
        rep = stable_set_check(traj, params, rates)
        assert rep.passed
        assert rep.context["bound"] > 0

    def test_from_interior_point(self, params, rates):
        rng = np.random.default_rng(7)
        y0 = rng.uniform(0.0, 1.0, size=5)
        traj = ode.integrate(y0, params, rates, 30.0, tol=1e-9)
        assert stable_set_check(traj, params, rates).passed

    def test_from_equilibrium(self, params, rates):
        from amyprion.stability import find_steady_state
        ss = find_steady_state(params, rates)
        y0 = np.array([ss.A_inf, ss.u_inf, ss.p_inf, ss.b_inf, ss.m_inf])
        traj = ode.integrate(y0, params, rates, 30.0, tol=1e-9)
        assert stable_set_check(traj, params, rates).passed


class TestBalanceAndEnvelope:
    def test_oligomer_balance_passes(self, params, rates):
        run, _ = coupled_run(params, rates)
        rep = oligomer_balance(run, params, rates)
        assert rep.passed

    def test_mass_stays_inside_envelope(self, params, rates):
        run, _ = coupled_run(params, rates)
        rep = mass_estimate_check(run, params, rates)
        assert rep.passed
        # equality holds at t = 0, strict inequality after
        assert rep.max_violation <= 0

    def test_contraction_gap(self, params, rates):
        g = pde.PlaqueGrid.uniform(1.0, 10.0, 450, pde.exp_decay_density(1.0, 1.0, 1.0))
        state = pde.CoupledState(grid=g, u=1.0, p=1.0, b=0.0)
        rep = contraction_gap_check(state, 0.2, params, rates, n_steps=400)
        assert rep.passed


class TestMomentClosure:
    def test_refinement_reduces_deviation(self, params, rates):
        devs = []
        for cells in (300, 600):
            g = pde.PlaqueGrid.uniform(1.0, 12.0, cells,
                                       pde.exp_decay_density(1.0, 1.0, 1.0))
            state = pde.CoupledState(grid=g, u=1.0, p=1.0, b=0.5)
            rep = moment_closure_check(params, rates, state, 0.3)
            devs.append(rep.max_violation)
        assert devs[1] < devs[0]

    def test_rejects_size_dependent_rates(self, params):
        pl = RateModel.power_law(1.0, 0.5, 1.0)
        g = pde.PlaqueGrid.uniform(1.0, 4.0, 50)
        state = pde.CoupledState(grid=g, u=1.0, p=1.0, b=0.0)
        with pytest.raises(ValueError):
            moment_closure_check(params, pl, state, 0.1)


class TestRunAll:
    def test_battery_green(self, params, rates):
        reports = run_all(params, rates, cells=800, T=0.4, density_scale=0.5)
        names = [r.name for r in reports]
        assert names == ["prion_balance", "stable_set", "prion_balance",
                         "oligomer_balance", "mass_estimate", "moment_closure"]
        for rep in reports:
            assert rep.passed, str(rep)
            assert "model" in rep.context
