"""Fixed-point (Picard) solver for the coupled transport system."""

import numpy as np
import pytest

from amyprion.model import Parameters, RateModel
from amyprion.pde import (
    ContractionError,
    CoupledState,
    PlaqueGrid,
    exp_decay_density,
    picard_solve,
    simulate_coupled,
)


@pytest.fixture
def params():
    return Parameters(lambda_u=1, gamma_u=1, lambda_p=1, gamma_p=1,
                      tau=1, sigma=1, delta=1, alpha=1, n=1, epsilon=1)


@pytest.fixture
def rates():
    return RateModel.constant(rho0=1.0, mu0=1.0)


def benchmark_state(cells=400, x_max=8.0):
    g = PlaqueGrid.uniform(1.0, x_max, cells, exp_decay_density(1.0, 1.0, 1.0))
    return CoupledState(grid=g, u=1.0, p=1.0, b=0.0)


class TestConvergence:
    def test_contracts_on_short_horizon(self, params, rates):
        res = picard_solve(benchmark_state(), 0.1, 14, params, rates)
        assert res.converged
        assert res.contraction_ratio < 1.0
        assert res.deltas[-1] < res.deltas[0]

    def test_ratio_grows_with_horizon(self, params, rates):
        short = picard_solve(benchmark_state(), 0.05, 10, params, rates)
        long = picard_solve(benchmark_state(), 0.1, 10, params, rates)
        assert short.contraction_ratio < long.contraction_ratio

    def test_diverges_on_long_horizon(self, params, rates):
        g = PlaqueGrid.uniform(1.0, 40.0, 50, exp_decay_density(1.0, 5.0, 1.0))
        state = CoupledState(grid=g, u=1.0, p=1.0, b=0.0)
        with pytest.raises(ContractionError):
            picard_solve(state, 2.0, 8, params, rates, n_nodes=33)

    def test_equilibrium_is_fixed_point(self, params, rates):
        # alpha = 0 and no plaques: the soluble equilibrium maps to itself,
        # so the very first sweep reproduces the constant guess exactly
        p0 = params.replace(alpha=0.0)
        u_inf = np.sqrt(3.0) - 1.0
        p_inf = 1.0 / (0.5 * u_inf + 1.0)
        b_inf = u_inf * p_inf / 2.0
        g = PlaqueGrid.uniform(1.0, 5.0, 20)
        state = CoupledState(grid=g, u=u_inf, p=p_inf, b=b_inf)
        res = picard_solve(state, 0.5, 5, p0, rates, n_nodes=21)
        assert res.iterations == 1
        assert res.deltas[0] < 1e-13

    def test_input_validation(self, params, rates):
        state = benchmark_state(cells=20, x_max=3.0)
        with pytest.raises(ValueError):
            picard_solve(state, -1.0, 5, params, rates)
        with pytest.raises(ValueError):
            picard_solve(state, 0.1, 5, params, rates, n_nodes=2)


class TestAgreementWithGrid:
    def test_matches_finite_volume_march(self, params, rates):
        state = benchmark_state(cells=1200, x_max=8.0)
        T = 0.1
        res = picard_solve(state, T, 12, params, rates)
        run = simulate_coupled(state, T, params, rates, n_steps=2000)
        for name, node_vals, grid_vals in (
            ("u", res.u, run.u), ("p", res.p, run.p), ("b", res.b, run.b),
        ):
            mine = node_vals[-1]
            ref = grid_vals[-1]
            assert mine == pytest.approx(ref, rel=1e-3), name

    def test_moment_series_tracks_grid(self, params, rates):
        state = benchmark_state(cells=1200, x_max=8.0)
        res = picard_solve(state, 0.1, 12, params, rates)
        run = simulate_coupled(state, 0.1, params, rates, n_steps=2000)
        assert res.m0[-1] == pytest.approx(run.m0[-1], rel=5e-3)
        assert res.m1[-1] == pytest.approx(run.m1[-1], rel=5e-3)

    def test_nodes_span_requested_window(self, params, rates):
        state = benchmark_state(cells=100, x_max=4.0)
        res = picard_solve(state, 0.2, 8, params, rates, n_nodes=17)
        assert res.t_nodes[0] == 0.0
        assert res.t_nodes[-1] == pytest.approx(0.2)
        assert len(res.t_nodes) == 17
        assert res.u[0] == state.u and res.p[0] == state.p
