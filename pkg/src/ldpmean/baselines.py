"""Classical epsilon-LDP perturbation mechanisms and their closed-form variances.

These serve both as competitors in experiments and as analytic oracles in
tests.  All samplers take an explicit numpy Generator and accept scalars or
arrays of inputs (scalar in, scalar out).
"""

from __future__ import annotations

import math

import numpy as np

# Threshold above which the hybrid mechanism mixes in the piecewise branch.
# Exact closed form of the cutoff from the hybrid construction; ~0.610986.
_C = 6353.0
_D = 405.0 * math.sqrt(241.0)
HYBRID_EPS_STAR = math.log(
    (-5.0 + 2.0 * (_C - _D) ** (1.0 / 3.0) + 2.0 * (_C + _D) ** (1.0 / 3.0)) / 27.0
)


def check_eps(eps: float, allow_inf: bool = False) -> float:
    """Validate a privacy budget: finite positive float (inf when allowed)."""
    eps = float(eps)
    if math.isnan(eps) or eps <= 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    if math.isinf(eps) and not allow_inf:
        raise ValueError("eps must be finite here")
    return eps


def _check_range(x, beta: float) -> np.ndarray:
    xs = np.asarray(x, dtype=float)
    if np.any(np.abs(xs) > beta):
        raise ValueError(f"input outside [-{beta}, {beta}]")
    return xs


def laplace_perturb(x, beta: float, eps: float, rng: np.random.Generator):
    """x plus Laplace(0, 2*beta/eps) noise.

    Sampled by inverse CDF from a single uniform draw per value, so the
    consumption of the random stream is fixed and reproducible.
    """
    check_eps(eps)
    xs = _check_range(x, beta)
    b = 2.0 * beta / eps
    u = rng.random(np.shape(xs)) - 0.5
    noise = -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    out = xs + noise
    return float(out) if np.isscalar(x) else out


def laplace_variance(beta: float, eps: float) -> float:
    """Var of the Laplace mechanism: 2 * (2*beta/eps)^2 = 8*beta^2/eps^2."""
    check_eps(eps)
    return 8.0 * beta * beta / (eps * eps)


def duchi_perturb(x, beta: float, eps: float, rng: np.random.Generator):
    """Two-point mechanism: returns +/- beta*(e^eps+1)/(e^eps-1).

    Pr[positive] = (e^eps - 1) / (2 e^eps + 2) * x / beta + 1/2.
    """
    check_eps(eps)
    xs = _check_range(x, beta)
    e = math.exp(eps)
    support = beta * (e + 1.0) / (e - 1.0)
    p_pos = (e - 1.0) / (2.0 * e + 2.0) * xs / beta + 0.5
    out = np.where(rng.random(np.shape(xs)) < p_pos, support, -support)
    return float(out) if np.isscalar(x) else out


def duchi_conditional_variance(x, beta: float, eps: float):
    """Var[Y | X=x] = beta^2 ((e^eps+1)/(e^eps-1))^2 - x^2."""
    check_eps(eps)
    e = math.exp(eps)
    return beta * beta * ((e + 1.0) / (e - 1.0)) ** 2 - np.asarray(x, dtype=float) ** 2


def piecewise_params(eps: float) -> tuple[float, float]:
    """(C, p): output half-range and in-window density height."""
    check_eps(eps)
    h = math.exp(eps / 2.0)
    c = (h + 1.0) / (h - 1.0)
    p = (math.exp(eps) - h) / (2.0 * h + 2.0)
    return c, p


def piecewise_window(x, eps: float):
    """High-density window [l(x), r(x)] for input x in [-1, 1]."""
    c, _ = piecewise_params(eps)
    xs = np.asarray(x, dtype=float)
    left = (c + 1.0) / 2.0 * xs - (c - 1.0) / 2.0
    return left, left + c - 1.0


def piecewise_density(y, x: float, eps: float):
    """Conditional output density f(y | x) of the piecewise mechanism."""
    c, p = piecewise_params(eps)
    left, right = piecewise_window(x, eps)
    ys = np.asarray(y, dtype=float)
    dens = np.where(
        (ys >= left) & (ys <= right),
        p,
        np.where(np.abs(ys) <= c, p / math.exp(eps), 0.0),
    )
    return float(dens) if np.isscalar(y) else dens


def piecewise_perturb(x, eps: float, rng: np.random.Generator):
    """Piecewise mechanism on [-1, 1]; output lies in [-C, C].

    With probability e^{eps/2}/(e^{eps/2}+1) the output is uniform on the
    window [l(x), r(x)]; otherwise it is uniform on the complement
    [-C, l(x)] u [r(x), C], drawn by a length-proportional segment choice.
    For general beta the caller scales x in and the result out.
    """
    xs = _check_range(x, 1.0)
    c, _ = piecewise_params(eps)
    h = math.exp(eps / 2.0)
    left, right = piecewise_window(xs, eps)
    shape = np.shape(xs)

    in_window = rng.random(shape) < h / (h + 1.0)
    u = rng.random(shape)
    # within the window: uniform on [l, r]
    y_in = left + u * (right - left)
    # off the window: pick a side proportionally to its length, then uniform
    len_lo = left + c  # length of [-C, l]
    len_hi = c - right
    v = rng.random(shape) * (len_lo + len_hi)
    y_out = np.where(v < len_lo, -c + v, right + (v - len_lo))
    out = np.where(in_window, y_in, y_out)
    return float(out) if np.isscalar(x) else out


def piecewise_conditional_variance(x, eps: float):
    """Var[Y | X=x] for the piecewise mechanism on [-1, 1]."""
    check_eps(eps)
    h = math.exp(eps / 2.0)
    xs = np.asarray(x, dtype=float)
    return xs * xs / (h - 1.0) + (h + 3.0) / (3.0 * (h - 1.0) ** 2)


def hybrid_alpha(eps: float) -> float:
    """Mixing weight of the piecewise branch in the hybrid mechanism."""
    check_eps(eps)
    return 1.0 - math.exp(-eps / 2.0) if eps > HYBRID_EPS_STAR else 0.0


def hybrid_perturb(x, beta: float, eps: float, rng: np.random.Generator):
    """Mixture of the piecewise and two-point mechanisms at weight alpha."""
    xs = _check_range(x, beta)
    alpha = hybrid_alpha(eps)
    use_pm = rng.random(np.shape(xs)) < alpha
    # draw both branches unconditionally so stream consumption is fixed
    y_pm = beta * piecewise_perturb(xs / beta, eps, rng)
    y_du = duchi_perturb(xs, beta, eps, rng)
    out = np.where(use_pm, y_pm, y_du)
    return float(out) if np.isscalar(x) else out


def generalized_rr(index, n_categories: int, eps: float, rng: np.random.Generator):
    """Randomized response over {0, ..., n_categories-1}.

    Keeps the true index with probability e^eps / (e^eps + n_categories - 1),
    otherwise reports a uniform draw among the other indices.  eps = 0 is the
    uniform channel; eps = inf the identity.
    """
    eps = float(eps)
    if math.isnan(eps) or eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps!r}")
    if n_categories < 2:
        raise ValueError("need at least two categories")
    idx = np.asarray(index)
    if np.any(idx < 0) or np.any(idx >= n_categories):
        raise ValueError("index out of range")
    if math.isinf(eps):
        return int(idx) if np.isscalar(index) else idx.copy()
    e = math.exp(eps)
    keep = rng.random(np.shape(idx)) < e / (e + n_categories - 1.0)
    other = rng.integers(0, n_categories - 1, size=np.shape(idx))
    other += other >= idx  # skip the true index
    out = np.where(keep, idx, other)
    return int(out) if np.isscalar(index) else out
