from pathlib import Path

import numpy as np
import pytest

from dpdmon import GarchParams, simulate_garch_path
from dpdmon import _backend

FIXTURES = Path(__file__).parent / "fixtures"

THETA0 = GarchParams(0.2, (0.2,), (0.6,))
THETA1 = GarchParams(0.2, (0.3,), (0.2,))
THETA2 = GarchParams(0.2, (0.1,), (0.8,))
THETA3 = GarchParams(0.5, (0.2,), (0.6,))


@pytest.fixture(scope="session")
def garch_sample_1000():
    return simulate_garch_path(THETA0, 1000, seed=20240701)


def changed_series(theta0, theta1, n_pre, n_post, seed, burn=500):
    """Single-recursion regime switch: theta1 continues from theta0's lag state."""
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(burn + n_pre + n_post)
    v = theta0.unconditional_variance()
    x_pre, x2l, s2l = _backend.garch_simulate(
        theta0.as_array(), theta0.p, theta0.q, eps[: burn + n_pre],
        np.full(theta0.p, v), np.full(theta0.q, v),
    )
    x_post, _, _ = _backend.garch_simulate(
        theta1.as_array(), theta1.p, theta1.q, eps[burn + n_pre :], x2l, s2l
    )
    return np.concatenate([x_pre, x_post])[burn:]
