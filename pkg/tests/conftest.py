"""Shared fixtures: solved noise tables are expensive, so build them once.

The table suite fixes n_bins=8, m=32 (the harness default window ratio),
r=0.5, and five quantized pmfs of different character.  Narrower windows make
the program infeasible at eps=0.5, so every table here uses the 4x window.
"""

import numpy as np
import pytest

from ldpmean import (
    BetaDistribution,
    NoiseShape,
    QuantizedPmf,
    ShiftedExponential,
    TruncatedGaussian,
    make_domain,
    solve_noise_table,
    true_pmf,
)

EPS_GRID = (0.5, 1.0, 2.0, 4.0)


@pytest.fixture(scope="session")
def domain8():
    return make_domain(beta=1.0, n_bins=8)


@pytest.fixture(scope="session")
def suite_pmfs(domain8):
    """Five pmfs: a point mass plus four spread shapes."""
    point = np.zeros(9)
    point[0] = 1.0
    return {
        "point": QuantizedPmf(masses=point),
        "uniform": true_pmf(BetaDistribution(1.0, 1.0), domain8),
        "gaussian": true_pmf(TruncatedGaussian(0.0, 0.1), domain8),
        "shifted_exp": true_pmf(ShiftedExponential(6.0), domain8),
        "u_shape": true_pmf(BetaDistribution(0.5, 0.5), domain8),
    }


@pytest.fixture(scope="session")
def solved_tables(domain8, suite_pmfs):
    """NoiseTable per (pmf name, eps) over the full grid; ~20 LP solves."""
    shape = NoiseShape(m=32, r=0.5)
    tables = {}
    for name, pmf in suite_pmfs.items():
        for eps in EPS_GRID:
            tables[(name, eps)] = solve_noise_table(pmf, eps, shape, domain8)
    return tables
