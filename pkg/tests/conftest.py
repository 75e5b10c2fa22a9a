import numpy as np
import pytest

from secran.hermitian import random_psd
from secran.rates import DesignVariables
from secran.system import SystemConfig, draw_realization


def random_vars(rng, config, scale=1.0, with_phi=False):
    n = config.n_r
    R = np.stack([random_psd(rng, n, scale=scale) for _ in range(config.num_ues)])
    Omega = random_psd(rng, n, scale=scale) + 0.05 * np.eye(n)
    phi = None
    if with_phi:
        phi = tuple(random_psd(rng, b, scale=scale) for b in config.blocks.block_sizes)
    return DesignVariables(R, Omega, phi)


def random_instance(rng, max_rus=3, max_ues=3, max_ant=2, power_db=None):
    config = SystemConfig(
        num_rus=int(rng.integers(1, max_rus + 1)),
        num_ues=int(rng.integers(1, max_ues + 1)),
        ru_antennas=int(rng.integers(1, max_ant + 1)),
        ue_antennas=int(rng.integers(1, max_ant + 1)),
        fronthaul_capacity=float(rng.uniform(0.5, 3.0)),
        reference_distance=200.0,
    ).with_power_db(power_db if power_db is not None else float(rng.uniform(0, 20)))
    return config, draw_realization(config, int(rng.integers(2**32)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_pair():
    """N_R = 1, n_R = 1, N_U = 2 with unit channels."""
    from secran.system import fixed_channels

    config = SystemConfig(num_rus=1, num_ues=2, fronthaul_capacity=1.0, power_limit=10.0)
    return config, fixed_channels(config, [np.array([[1.0]]), np.array([[1.0]])])
