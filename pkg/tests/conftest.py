"""Shared fixtures: benchmark parameter sets and a config-file factory."""

import numpy as np
import pytest

from amyprion.model import Parameters, RateModel


@pytest.fixture
def all_ones():
    """Every rate equal to one, linear nucleation (n=1)."""
    params = Parameters(
        lambda_u=1.0, gamma_u=1.0, lambda_p=1.0, gamma_p=1.0,
        tau=1.0, sigma=1.0, delta=1.0, alpha=1.0, n=1, epsilon=1.0,
    )
    return params, RateModel.constant(rho0=1.0, mu0=1.0)


@pytest.fixture
def certificate_params():
    """alpha=0 regime satisfying the chain condition with triple (4, 2, 1/4)."""
    params = Parameters(
        lambda_u=1.0, gamma_u=1.0, lambda_p=1.0, gamma_p=0.5,
        tau=1.0, sigma=2.0, delta=2.0, alpha=0.0, n=1, epsilon=1.0,
    )
    return params, RateModel.constant(rho0=1.0, mu0=1.0)


@pytest.fixture
def config_file(tmp_path):
    """Write a key=value config and return its path."""

    def make(name="model.cfg", **overrides):
        values = {
            "lambda_u": 1.0, "gamma_u": 1.0, "lambda_p": 1.0, "gamma_p": 1.0,
            "tau": 1.0, "sigma": 1.0, "delta": 1.0, "alpha": 1.0,
            "n": 1, "epsilon": 1.0, "rate_kind": "constant",
            "rho0": 1.0, "mu0": 1.0,
        }
        values.update(overrides)
        path = tmp_path / name
        lines = [f"{k} = {v}" for k, v in values.items() if v is not None]
        path.write_text("\n".join(lines) + "\n")
        return str(path)

    return make


def draw_params(rng, n=None):
    """One random valid parameter draw, rates log-uniform in [0.1, 10]."""
    vals = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=10))
    if n is None:
        n = int(rng.integers(1, 4))
    params = Parameters(
        lambda_u=vals[0], gamma_u=vals[1], lambda_p=vals[2], gamma_p=vals[3],
        tau=vals[4], sigma=vals[5], delta=vals[6], alpha=vals[7],
        n=n, epsilon=1.0,
    )
    rates = RateModel.constant(rho0=vals[8], mu0=vals[9])
    return params, rates
