"""Shared fixtures: small configurations and cached channel realizations."""

import numpy as np
import pytest

from squintlab.model import SystemConfig, sample_realization
from squintlab.schemes import OptimizerConfig


@pytest.fixture(scope="session")
def desk_cfg():
    """Default small profile; P_t = 10 realizes 10 dB receive SNR at unit noise."""
    return SystemConfig.desk_default()


@pytest.fixture(scope="session")
def full_cfg():
    """Full-scale profile, used only for closed-form grid arithmetic checks."""
    return SystemConfig.paper_default()


@pytest.fixture(scope="session")
def opt():
    return OptimizerConfig()


@pytest.fixture(scope="session")
def realization(desk_cfg):
    return sample_realization(12345, desk_cfg, 0.1)


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)


def random_angles(rng, n):
    theta = rng.uniform(0.0, np.pi, n)
    phi = rng.uniform(-np.pi / 2, np.pi / 2, n)
    return theta, phi
