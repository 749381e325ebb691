"""Variance and error metrics: expected conditional variance of a noise
table, the pmf-averaged closed forms of the baselines, the relative-error
bound linking histogram error to variance error, and the squared-error
metric of the end-to-end experiments."""

from __future__ import annotations

import math

import numpy as np

from .adaptive import NoiseTable, tail_second_moment
from .baselines import (
    check_eps,
    duchi_conditional_variance,
    hybrid_alpha,
    laplace_variance,
    piecewise_conditional_variance,
)
from .domain import QuantizedPmf

BASELINE_MECHANISMS = ("duchi", "piecewise", "laplace", "hybrid")


def expected_variance(table: NoiseTable, pmf: QuantizedPmf) -> float:
    """pmf-weighted conditional noise variance of a table, tails exact.

    Per row: sum_{|j|<M} (sigma j)^2 q[i][j] + sigma^2 T2 (q[i][-M]+q[i][M]).
    Evaluating this at the pmf the table was solved against reproduces its
    lp_objective.
    """
    if len(pmf) != table.domain.n_bins + 1:
        raise ValueError("pmf size does not match table")
    m, r = table.shape.m, table.shape.r
    sigma = table.domain.sigma
    js = np.arange(-m + 1, m)
    window = table.q[:, 1:-1] @ (sigma * js) ** 2
    tails = sigma * sigma * tail_second_moment(m, r) * (table.q[:, 0] + table.q[:, -1])
    return float(pmf.masses @ (window + tails))


def variance_relative_error(v_hat: float, v: float) -> float:
    """phi = (v_hat - v) / v_hat."""
    if v_hat == 0.0:
        raise ValueError("v_hat must be nonzero")
    return (v_hat - v) / v_hat


def claim3_bound(psi: float) -> tuple[float, float]:
    """Interval (-psi/(1+psi), psi/(1-psi)) containing the variance relative
    error when the histogram relative error is at most psi < 1."""
    if not (0.0 <= psi):
        raise ValueError("psi must be nonnegative")
    if psi >= 1.0:
        raise ValueError("bound undefined for psi >= 1")
    return (-psi / (1.0 + psi), psi / (1.0 - psi))


def baseline_expected_variance(
    mechanism: str, pmf: QuantizedPmf, eps: float, beta: float
) -> float:
    """pmf-weighted average of a baseline's conditional variance on the edge
    grid implied by (beta, len(pmf))."""
    check_eps(eps)
    xs = np.linspace(-beta, beta, len(pmf))
    if mechanism == "laplace":
        per_x = np.full(xs.size, laplace_variance(beta, eps))
    elif mechanism == "duchi":
        per_x = duchi_conditional_variance(xs, beta, eps)
    elif mechanism == "piecewise":
        per_x = beta * beta * piecewise_conditional_variance(xs / beta, eps)
    elif mechanism == "hybrid":
        # both branches are unbiased at every x, so the conditional variance
        # of the mixture is the mixture of conditional variances
        alpha = hybrid_alpha(eps)
        per_x = alpha * beta * beta * piecewise_conditional_variance(
            xs / beta, eps
        ) + (1.0 - alpha) * duchi_conditional_variance(xs, beta, eps)
    else:
        raise ValueError(
            f"unknown mechanism {mechanism!r}; expected one of {BASELINE_MECHANISMS}"
        )
    return float(pmf.masses @ per_x)


def squared_error(estimate: float, truth: float) -> float:
    return (estimate - truth) ** 2
