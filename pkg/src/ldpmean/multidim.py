"""Multidimensional mean estimation via uniform attribute sampling.

Each client draws k of the d dimensions without replacement and runs the
one-dimensional two-phase pipeline for each drawn dimension at the full
budget.  k = 1 is the reference configuration; privacy accounting for
clients reporting several attributes is out of scope beyond that (each
reported attribute is treated at full eps, a documented limitation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adaptive import NoiseShape, run_protocol
from .domain import make_domain


@dataclass(frozen=True)
class MultiDataset:
    """n x d matrix of client rows with per-dimension half-widths."""

    rows: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.size == 0:
            raise ValueError("rows must be a nonempty n x d matrix")
        bounds = np.asarray(self.bounds, dtype=float)
        if bounds.shape != (rows.shape[1],):
            raise ValueError("need one bound per dimension")
        if np.any(bounds <= 0):
            raise ValueError("bounds must be positive")
        if np.any(np.abs(rows) > bounds[None, :]):
            raise ValueError("entry outside its dimension's bounds")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "bounds", bounds)
        rows.setflags(write=False)
        bounds.setflags(write=False)


@dataclass(frozen=True)
class MultidimResult:
    estimates: np.ndarray  # one mean estimate per dimension
    per_dimension: list  # the underlying ProtocolResult per dimension


def assign_attributes(
    n_clients: int, d: int, k: int, rng: np.random.Generator
) -> np.ndarray:
    """(n_clients, k) matrix of distinct dimension indices per client,
    uniform without replacement.  k = d is deterministic (all dimensions,
    no stream consumption)."""
    if n_clients < 1:
        raise ValueError("n_clients must be >= 1")
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    if k == d:
        return np.tile(np.arange(d), (n_clients, 1))
    scores = rng.random((n_clients, d))
    return np.argsort(scores, axis=1, kind="stable")[:, :k]


def run_multidim_protocol(
    data: MultiDataset,
    eps: float,
    split_ratio: float,
    k: int,
    shape: NoiseShape,
    rng: np.random.Generator,
    n_bins: int = 16,
    backend: str = "auto",
    assignment: np.ndarray | None = None,
    split_masks: list | None = None,
) -> MultidimResult:
    """Per-dimension two-phase protocol over the clients assigned to it.

    Dimensions are processed in index order against the single supplied
    stream, so d = 1 with k = 1 consumes the stream exactly as run_protocol
    does.  A precomputed assignment and per-dimension split masks can be
    passed so several mechanisms share one partition.
    """
    n, d = data.rows.shape
    if assignment is None:
        assignment = assign_attributes(n, d, k, rng)
    else:
        assignment = np.asarray(assignment)
        if assignment.shape != (n, k):
            raise ValueError("assignment shape does not match (n_clients, k)")
    results = []
    estimates = np.zeros(d)
    for dim in range(d):
        pool = np.nonzero((assignment == dim).any(axis=1))[0]
        if pool.size < 2:
            raise ValueError(
                f"dimension {dim} has {pool.size} assigned clients; need >= 2"
            )
        domain = make_domain(float(data.bounds[dim]), n_bins)
        mask = None if split_masks is None else split_masks[dim]
        res = run_protocol(
            data.rows[pool, dim],
            eps,
            split_ratio,
            shape,
            domain,
            rng,
            split_mask=mask,
            backend=backend,
        )
        results.append(res)
        estimates[dim] = res.mean_estimate
    return MultidimResult(estimates=estimates, per_dimension=results)
