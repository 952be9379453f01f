"""Shared fixtures: small seeded datasets and fitted models.

Everything here is deterministic; tests that need their own randomness
create a local Generator with an explicit seed.
"""

import numpy as np
import pytest

from onestep_select import (
    GAUSSIAN,
    LOGISTIC,
    Dataset,
    NetConfig,
    OlapModel,
    SimConfig,
    fit_elastic_net,
    simulate,
)


@pytest.fixture(scope="session")
def tiny_gaussian():
    """n=2, single column of ones, y=(1,2): the hand-computable instance."""
    X = np.ones((2, 1))
    y = np.array([1.0, 2.0])
    return Dataset(X=X, y=y, family=GAUSSIAN)


@pytest.fixture(scope="session")
def logistic_small():
    """Seeded logistic data at p=6, weak enough that nothing saturates."""
    cfg = SimConfig(n=80, p=6, rho=0.3, s_star=2, signal_low=0.5,
                    signal_high=1.0, family="logistic", seed=14)
    data, theta_star, delta_star = simulate(cfg)
    return data, theta_star, delta_star


@pytest.fixture(scope="session")
def logistic_small_model(logistic_small):
    data, _, _ = logistic_small
    res = fit_elastic_net(data, NetConfig(lambda1=0.4, lambda2=0.0))
    return OlapModel(data, res.theta_tilde, u=1.0)


@pytest.fixture(scope="session")
def gaussian_small():
    cfg = SimConfig(n=60, p=5, rho=0.2, s_star=2, signal_low=0.8,
                    signal_high=1.2, family="gaussian", seed=3)
    return simulate(cfg)


@pytest.fixture(scope="session")
def gaussian_small_model(gaussian_small):
    data, _, _ = gaussian_small
    res = fit_elastic_net(data, NetConfig(lambda1=0.3, lambda2=0.0))
    return OlapModel(data, res.theta_tilde, u=1.0)
