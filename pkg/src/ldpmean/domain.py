"""Quantized data domain, randomized rounding, and empirical quantized pmfs.

The data range [-beta, beta] is split into ``n_bins`` equal bins whose N+1
edges form the discrete support everything downstream works on.  A real value
is attached to its two neighbouring edges with tent weights

    w_i(x) = 1 - |x - x_i| / sigma

which makes the expected rounded value equal to x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuantizedDomain:
    """The interval [-beta, beta] with N+1 uniformly spaced edges."""

    beta: float
    n_bins: int
    sigma: float
    edges: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "edges", np.asarray(self.edges, dtype=float))
        self.edges.setflags(write=False)


@dataclass(frozen=True)
class QuantizedPmf:
    """Probability masses on the N+1 edges of a quantized domain."""

    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or m.size < 1:
            raise ValueError("pmf must be a nonempty vector")
        if np.any(m < -1e-12):
            raise ValueError("pmf has negative mass")
        if abs(m.sum() - 1.0) > 1e-9:
            raise ValueError(f"pmf sums to {m.sum()!r}, not 1")
        object.__setattr__(self, "masses", m)
        m.setflags(write=False)

    def __len__(self):
        return self.masses.size


@dataclass(frozen=True)
class LinearTransform:
    """Invertible affine map t(x) = scale * x + offset."""

    scale: float
    offset: float

    def __post_init__(self):
        if self.scale == 0:
            raise ValueError("scale must be nonzero")

    def apply(self, x):
        return self.scale * np.asarray(x, dtype=float) + self.offset

    def invert(self, t):
        return (np.asarray(t, dtype=float) - self.offset) / self.scale


def make_domain(beta: float, n_bins: int) -> QuantizedDomain:
    """Build the quantized domain with sigma = 2*beta/N and edges -beta + j*sigma."""
    if not (beta > 0):
        raise ValueError(f"beta must be positive, got {beta!r}")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins!r}")
    n_bins = int(n_bins)
    sigma = 2.0 * beta / n_bins
    edges = -beta + sigma * np.arange(n_bins + 1)
    # pin the endpoints so domain checks are exact at +/-beta
    edges[0] = -beta
    edges[-1] = beta
    return QuantizedDomain(beta=float(beta), n_bins=n_bins, sigma=sigma, edges=edges)


def _check_in_domain(domain: QuantizedDomain, x) -> np.ndarray:
    xs = np.asarray(x, dtype=float)
    if np.any(xs < -domain.beta) or np.any(xs > domain.beta):
        bad = xs[(xs < -domain.beta) | (xs > domain.beta)]
        raise ValueError(
            f"value {bad.flat[0]!r} outside [-{domain.beta}, {domain.beta}]"
        )
    return xs


def rounding_weights(domain: QuantizedDomain, x: float) -> tuple[int, float]:
    """Left edge index and its tent weight for x.

    x exactly on an interior edge is assigned to that edge with weight 1;
    x = +beta lands in the last bin with left weight 0.  Both rules keep the
    weights deterministic at boundaries.
    """
    idx, w = rounding_weights_array(domain, [x])
    return int(idx[0]), float(w[0])


def rounding_weights_array(domain: QuantizedDomain, x) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rounding_weights: arrays of left indices and left weights."""
    xs = _check_in_domain(domain, x)
    idx = np.floor((xs + domain.beta) / domain.sigma).astype(np.int64)
    np.clip(idx, 0, domain.n_bins - 1, out=idx)
    w_left = 1.0 - (xs - domain.edges[idx]) / domain.sigma
    # floating error can leave w a hair outside [0, 1]
    np.clip(w_left, 0.0, 1.0, out=w_left)
    return idx, w_left


def round_randomized(domain: QuantizedDomain, x: float, rng: np.random.Generator) -> int:
    """Round x to a neighbouring edge index, left with probability w_left."""
    return int(round_randomized_array(domain, [x], rng)[0])


def round_randomized_array(domain, x, rng: np.random.Generator) -> np.ndarray:
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    idx, w_left = rounding_weights_array(domain, xs)
    go_right = rng.random(xs.shape) >= w_left
    return idx + go_right


def empirical_quantized_pmf(domain: QuantizedDomain, data) -> QuantizedPmf:
    """Expected-rounding pmf of a dataset: masses[i] = mean of w_i(x) over data.

    Deterministic (no sampling); the sampled variant lives inside the
    mechanisms that need it.
    """
    xs = np.atleast_1d(np.asarray(data, dtype=float))
    if xs.size == 0:
        raise ValueError("data must be nonempty")
    idx, w_left = rounding_weights_array(domain, xs)
    masses = np.zeros(domain.n_bins + 1)
    np.add.at(masses, idx, w_left)
    np.add.at(masses, idx + 1, 1.0 - w_left)
    masses /= xs.size
    return QuantizedPmf(masses)


def rescale_to(data, target_beta: float):
    """Affinely map data onto [-target_beta, target_beta].

    min(data) goes to -beta, max(data) to +beta.  Constant data maps to 0
    with scale 1 (degenerate rule, documented) so the transform stays
    invertible.  Data must be finite, and the range must be wide enough
    that the map's slope 2*beta/(max - min) fits in a double; otherwise
    this raises ValueError instead of emitting a garbage transform.
    Returns (scaled array, LinearTransform).
    """
    if not (target_beta > 0):
        raise ValueError("target_beta must be positive")
    xs = np.atleast_1d(np.asarray(data, dtype=float))
    if xs.size == 0:
        raise ValueError("data must be nonempty")
    if not np.isfinite(xs).all():
        raise ValueError("data must be finite to rescale")
    lo, hi = float(xs.min()), float(xs.max())
    if hi == lo:
        t = LinearTransform(scale=1.0, offset=-lo)
    else:
        scale = 2.0 * target_beta / (hi - lo)
        offset = -target_beta - scale * lo
        if not (np.isfinite(scale) and scale != 0.0 and np.isfinite(offset)):
            raise ValueError(
                f"data range [{lo}, {hi}] cannot be mapped onto "
                f"[-{target_beta}, {target_beta}] in float arithmetic"
            )
        t = LinearTransform(scale=scale, offset=offset)
    scaled = t.apply(xs)
    np.clip(scaled, -target_beta, target_beta, out=scaled)
    return scaled, t
