"""Shared helpers: seeded random parameter grids over the stable region."""

import numpy as np
import pytest

from casq.params import SystemParams, coefficients, threshold_epsilon


def stable_params(rng, n, eps_fraction_max=0.95, lambda_ratio_max=None):
    """Draw n random parameter sets strictly below threshold.

    eps_fraction_max bounds the drive as a fraction of threshold;
    lambda_ratio_max optionally bounds lambda_plus / lambda_minus (keeps
    transient integrations short where a test needs them).
    """
    out = []
    while len(out) < n:
        a = float(rng.uniform(0.0, 200.0))
        kappa = float(rng.uniform(0.1, 2.0))
        beta = float(rng.uniform(0.0, 2.0))
        p0 = SystemParams(a=a, kappa=kappa, beta=beta, epsilon=0.0)
        eps_th = threshold_epsilon(p0)
        if eps_th <= 0:
            continue
        eps = float(rng.uniform(0.0, eps_fraction_max)) * eps_th
        p = p0.with_epsilon(eps)
        c = coefficients(p)
        if c.lambda_minus <= 1e-6:
            continue
        if lambda_ratio_max is not None and c.lambda_plus / c.lambda_minus > lambda_ratio_max:
            continue
        out.append(p)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
