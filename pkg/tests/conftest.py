import numpy as np
import pytest

from mwrelay.channel import SystemParams, estimation_moments


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def hand_case():
    """M=2, K=2, unit gains and tau*P_p = 1, so sigma^2 = 1/2."""
    params = SystemParams(M=2, K=2, T=200, tau=2, P_p=0.5, P_u=1.0, P_r=1.0)
    return params, estimation_moments(np.ones(2), params.tau, params.P_p)
