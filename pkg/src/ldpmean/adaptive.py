"""Distribution-adaptive additive mechanism: LP construction and solution of
the noise table, exact privacy verification, sampling, and the two-phase
protocol.

The noise law conditioned on edge x_i lives on the integer offsets j of the
edge grid.  Offsets with |j| < M carry free masses q[i][j]; beyond the window
the mass decays geometrically, p(j) = q[i][+-M] * r^{|j|-M}, which keeps the
infinite support summable with the closed-form moments below and keeps every
constraint linear in the q variables.

The optimizer minimizes the pmf-weighted conditional second moment subject
to, per row, normalization and zero mean (both with exact tail corrections)
and, per output grid index k = i + j, a privacy tube
t_k <= d_i(k) <= e^eps * t_k across all inputs i, where d_i(k) is the noise
mass the table assigns to output index k under input i.  One auxiliary t_k
per output replaces the quadratic number of pairwise ratio constraints; the
tube is feasible exactly when max_i d_i(k) <= e^eps * min_i d_i(k).  Beyond
k = -M and k = N+M every d_i(k) scales by the same factor r per step, so the
end indices pin the two asymptotic tail regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog as _scipy_linprog

from . import lp as lplib
from .baselines import check_eps
from .domain import QuantizedDomain, QuantizedPmf, round_randomized_array, rounding_weights_array
from .freqest import build_rr_matrix, collect_perturbed_histogram, reconstruct_pmf

# embedded simplex below this many rows+variables, HiGHS above
_SIMPLEX_SIZE_LIMIT = 800

# invariant tolerances for solved tables
_ROW_TOL = 1e-7
_NEG_TOL = 1e-9
# solver round-off floor: solved masses at or below this are vertex dust
# (true basic values are either exactly zero or structurally positive), and
# ratios of dust would poison the exact privacy enumeration
_DUST = 1e-10


def tail_first_moment(m: int, r: float) -> float:
    """T1 = sum_{g>=0} (m+g) r^g = m/(1-r) + r/(1-r)^2."""
    _check_tail_args(m, r)
    return m / (1.0 - r) + r / (1.0 - r) ** 2


def tail_second_moment(m: int, r: float) -> float:
    """T2 = sum_{g>=0} (m+g)^2 r^g = m^2/(1-r) + (2m-1)r/(1-r)^2 + 2r/(1-r)^3."""
    _check_tail_args(m, r)
    one = 1.0 - r
    return m * m / one + (2.0 * m - 1.0) * r / one**2 + 2.0 * r / one**3


def _check_tail_args(m: int, r: float) -> None:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m!r}")
    if not (0.0 <= r):
        raise ValueError(f"r must be in [0, 1), got {r!r}")
    if r >= 1.0:
        raise ValueError(f"geometric tail diverges for r = {r!r}")


@dataclass(frozen=True)
class NoiseShape:
    """Explicit window half-width M and geometric tail ratio r."""

    m: int
    r: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not (0.0 < self.r < 1.0):
            raise ValueError("r must lie in (0, 1)")


@dataclass(frozen=True)
class NoiseTable:
    """Conditional noise law: q[i][j+M] is the mass of offset j under edge i
    for |j| <= M; offsets beyond +-M decay geometrically with ratio r."""

    domain: QuantizedDomain
    shape: NoiseShape
    q: np.ndarray
    eps: float
    lp_objective: float | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        n, m = self.domain.n_bins, self.shape.m
        if q.shape != (n + 1, 2 * m + 1):
            raise ValueError(
                f"q must be ({n + 1}, {2 * m + 1}), got {q.shape}"
            )
        if np.any(q < -_NEG_TOL):
            raise ValueError("noise table has negative mass")
        object.__setattr__(self, "q", q)
        q.setflags(write=False)


@dataclass(frozen=True)
class PrivacyReport:
    max_ratio: float
    worst_pair: tuple | None  # (output index k, input i of max, input i of min)
    bound: float
    passed: bool


@dataclass(frozen=True)
class ProtocolResult:
    mean_estimate: float
    phase1_pmf: QuantizedPmf
    noise_table: NoiseTable
    phase1_count: int
    phase2_count: int
    lp_objective: float


def noise_mass(table: NoiseTable, i: int, j: int) -> float:
    """Mass of noise offset j under edge i, tails extrapolated geometrically."""
    if not 0 <= i <= table.domain.n_bins:
        raise ValueError("edge index out of range")
    m, r = table.shape.m, table.shape.r
    if -m < j < m:
        return float(table.q[i, j + m])
    if j >= m:
        return float(table.q[i, 2 * m] * r ** (j - m))
    return float(table.q[i, 0] * r ** (-m - j))


def build_lp(
    pmf: QuantizedPmf,
    eps: float,
    shape: NoiseShape,
    domain: QuantizedDomain,
) -> lplib.LinearProgram:
    """Assemble the noise-design LP over the q variables plus one t_k per
    output grid index k in {-M, ..., N+M} (no auxiliaries at eps = inf)."""
    eps = check_eps(eps, allow_inf=True)
    n = domain.n_bins
    m = shape.m
    if len(pmf) != n + 1:
        raise ValueError("pmf size does not match domain")
    if m < n:
        raise ValueError(f"noise window m = {m} must be >= n_bins = {n}")
    r = shape.r
    sigma = domain.sigma
    width = 2 * m + 1
    nq = (n + 1) * width
    finite = math.isfinite(eps)
    n_aux = (n + 2 * m + 1) if finite else 0

    def qi(i: int, j: int) -> int:
        return i * width + j + m

    t1 = tail_first_moment(m, r)
    t2 = tail_second_moment(m, r)

    objective = np.zeros(nq + n_aux)
    window_cost = (sigma * np.arange(-m, m + 1)) ** 2
    window_cost[0] = window_cost[-1] = sigma * sigma * t2
    for i in range(n + 1):
        objective[i * width : (i + 1) * width] = pmf.masses[i] * window_cost

    prog = lplib.LinearProgram(num_vars=nq + n_aux, objective=objective)

    tail_norm = 1.0 / (1.0 - r)
    for i in range(n + 1):
        norm = {qi(i, j): 1.0 for j in range(-m + 1, m)}
        norm[qi(i, -m)] = tail_norm
        norm[qi(i, m)] = tail_norm
        prog.add_constraint(norm, lplib.EQUAL, 1.0)

        mean = {qi(i, j): float(j) for j in range(-m + 1, m) if j != 0}
        mean[qi(i, -m)] = -t1
        mean[qi(i, m)] = t1
        prog.add_constraint(mean, lplib.EQUAL, 0.0)

    if finite:
        grow = math.exp(eps)
        for k in range(-m, n + m + 1):
            t_k = nq + k + m
            for i in range(n + 1):
                j = k - i
                if -m < j < m:
                    var, coeff = qi(i, j), 1.0
                elif j >= m:
                    var, coeff = qi(i, m), r ** (j - m)
                else:
                    var, coeff = qi(i, -m), r ** (-m - j)
                # t_k <= d_i(k) <= e^eps * t_k; the upper row is divided by
                # e^eps so its coefficients stay O(1) at large eps (the raw
                # form feeds e^eps-scale entries into the simplex tableau,
                # which cycles numerically around eps = 8)
                prog.add_constraint({t_k: 1.0, var: -coeff}, lplib.LESS_EQUAL, 0.0)
                prog.add_constraint(
                    {var: coeff / grow, t_k: -1.0}, lplib.LESS_EQUAL, 0.0
                )
    return prog


def _solve_with_highs(prog: lplib.LinearProgram) -> lplib.LpSolution:
    rows_ub, rhs_ub, rows_eq, rhs_eq = [], [], [], []
    for con in prog.constraints:
        items = list(con.coeffs.items())
        cols = [j for j, _ in items]
        vals = [v for _, v in items]
        if con.sense == lplib.EQUAL:
            rows_eq.append((cols, vals))
            rhs_eq.append(con.rhs)
        elif con.sense == lplib.LESS_EQUAL:
            rows_ub.append((cols, vals))
            rhs_ub.append(con.rhs)
        else:
            rows_ub.append((cols, [-v for v in vals]))
            rhs_ub.append(-con.rhs)

    def to_csr(rows):
        indptr = np.cumsum([0] + [len(c) for c, _ in rows])
        indices = np.concatenate(
            [np.asarray(c, dtype=np.int64) for c, _ in rows]
        ) if rows else np.zeros(0, dtype=np.int64)
        data = np.concatenate(
            [np.asarray(v, dtype=float) for _, v in rows]
        ) if rows else np.zeros(0)
        return sparse.csr_matrix(
            (data, indices, indptr), shape=(len(rows), prog.num_vars)
        )

    res = _scipy_linprog(
        prog.objective,
        A_ub=to_csr(rows_ub) if rows_ub else None,
        b_ub=np.asarray(rhs_ub) if rows_ub else None,
        A_eq=to_csr(rows_eq) if rows_eq else None,
        b_eq=np.asarray(rhs_eq) if rows_eq else None,
        bounds=(0, None),
        method="highs",
    )
    status = {0: "optimal", 1: "iteration-limit", 2: "infeasible", 3: "unbounded"}.get(
        res.status, "iteration-limit"
    )
    x = res.x if res.x is not None else np.zeros(prog.num_vars)
    value = float(res.fun) if res.status == 0 else np.nan
    return lplib.LpSolution(status, np.asarray(x), value, int(res.nit))


def solve_lp(prog: lplib.LinearProgram, backend: str = "auto") -> lplib.LpSolution:
    """Route a program to the embedded simplex or the HiGHS backend.

    "auto" picks the embedded solver for small programs and HiGHS once
    rows + variables exceed a fixed threshold; the choice is deterministic
    in the program size only.
    """
    if backend == "auto":
        small = prog.num_vars + len(prog.constraints) <= _SIMPLEX_SIZE_LIMIT
        backend = "simplex" if small else "highs"
    if backend == "simplex":
        return lplib.solve(prog)
    if backend == "highs":
        return _solve_with_highs(prog)
    raise ValueError(f"unknown backend {backend!r}")


def solve_noise_table(
    pmf: QuantizedPmf,
    eps: float,
    shape: NoiseShape,
    domain: QuantizedDomain,
    backend: str = "auto",
) -> NoiseTable:
    """Solve the noise-design LP and package the optimum as a NoiseTable.

    The solved table is checked against its three invariants (row
    normalization, row zero mean, exact privacy); any violation raises.
    """
    eps = check_eps(eps, allow_inf=True)
    prog = build_lp(pmf, eps, shape, domain)
    sol = solve_lp(prog, backend=backend)
    if sol.status != "optimal":
        raise RuntimeError(
            f"noise-table LP did not solve: status={sol.status} "
            f"after {sol.iterations} iterations "
            f"(n_bins={domain.n_bins}, m={shape.m}, eps={eps})"
        )
    n, m = domain.n_bins, shape.m
    q = sol.x[: (n + 1) * (2 * m + 1)].reshape(n + 1, 2 * m + 1).copy()
    small_negative = (q < 0.0) & (q >= -_NEG_TOL)
    q[small_negative] = 0.0
    if np.any(q < 0.0):
        raise RuntimeError(f"solver returned negative mass {q.min()!r}")
    # drop vertex dust so outputs the optimum leaves empty verify as empty.
    # A cell is zeroed only when its whole output column sits at round-off
    # scale, so the clip can empty a column but never unbalance one (a flat
    # per-cell floor would break verification once a design's legitimate
    # masses approach the floor, which happens as eps grows).
    ks = np.arange(-m, n + m + 1)
    safe = _density_from_q(q, n, m, shape.r, ks).max(axis=0) <= _DUST
    for i in range(n + 1):
        inner = q[i, 1:-1]
        clip = safe[i + 1 : i + 2 * m] & (inner <= _DUST)
        inner[clip] = 0.0
        if q[i, 2 * m] <= _DUST and safe[i + 2 * m :].all():
            q[i, 2 * m] = 0.0
        if q[i, 0] <= _DUST and safe[: i + 1].all():
            q[i, 0] = 0.0

    table = NoiseTable(
        domain=domain, shape=shape, q=q, eps=eps, lp_objective=sol.objective_value
    )
    _check_row_invariants(table)
    if math.isfinite(eps):
        report = verify_privacy(table, eps)
        if not report.passed:
            raise RuntimeError(
                f"solved table fails privacy verification: "
                f"max_ratio={report.max_ratio!r} > bound={report.bound!r} "
                f"at {report.worst_pair}"
            )
    return table


def _check_row_invariants(table: NoiseTable) -> None:
    m, r = table.shape.m, table.shape.r
    q = table.q
    window = q[:, 1:-1].sum(axis=1)
    norm = window + (q[:, 0] + q[:, -1]) / (1.0 - r)
    if np.max(np.abs(norm - 1.0)) > _ROW_TOL:
        raise RuntimeError(
            f"row normalization off by {np.max(np.abs(norm - 1.0))!r}"
        )
    js = np.arange(-m + 1, m)
    t1 = tail_first_moment(m, r)
    mean = q[:, 1:-1] @ js + t1 * (q[:, -1] - q[:, 0])
    if np.max(np.abs(mean)) > _ROW_TOL:
        raise RuntimeError(f"row zero-mean off by {np.max(np.abs(mean))!r}")


def _density_matrix(table: NoiseTable, ks: np.ndarray) -> np.ndarray:
    """d[i, idx] = noise mass of output grid index ks[idx] under input i."""
    return _density_from_q(
        table.q, table.domain.n_bins, table.shape.m, table.shape.r, ks
    )


def _density_from_q(
    q: np.ndarray, n: int, m: int, r: float, ks: np.ndarray
) -> np.ndarray:
    d = np.zeros((n + 1, ks.size))
    for i in range(n + 1):
        j = ks - i
        window = np.abs(j) < m
        d[i, window] = q[i, j[window] + m]
        right = j >= m
        d[i, right] = q[i, 2 * m] * r ** (j[right] - m).astype(float)
        left = j <= -m
        d[i, left] = q[i, 0] * r ** (-m - j[left]).astype(float)
    return d


def _ratio_report(density: np.ndarray, ks: np.ndarray, eps: float, tol: float, labels=None):
    """Worst max/min column ratio of a (inputs x outputs) density matrix."""
    max_ratio = 0.0
    worst = None
    for col in range(ks.size):
        d = density[:, col]
        top = d.max()
        if top <= 0.0:
            continue  # no input puts mass here; nothing to compare
        bottom = d.min()
        ratio = math.inf if bottom <= 0.0 else top / bottom
        if ratio > max_ratio:
            max_ratio = ratio
            i_max = int(d.argmax())
            i_min = int(d.argmin())
            if labels is not None:
                worst = (int(ks[col]), labels[i_max], labels[i_min])
            else:
                worst = (int(ks[col]), i_max, i_min)
    bound = math.exp(eps) * (1.0 + tol) if math.isfinite(eps) else math.inf
    passed = (not math.isfinite(eps)) or max_ratio <= bound
    return PrivacyReport(max_ratio=max_ratio, worst_pair=worst, bound=bound, passed=passed)


def verify_privacy(table: NoiseTable, eps: float, tol: float = 1e-6) -> PrivacyReport:
    """Exact enumeration of the density-ratio bound over the output grid.

    Covers every output index k in {-M, ..., N+M} plus one representative
    beyond each end; past the ends all densities scale by the same factor r
    per step, so those two representatives pin the asymptotic tail regimes.
    A column where some input has zero mass while another has positive mass
    is disjoint support: ratio inf (pure eps-LDP cannot hold there).
    """
    eps = check_eps(eps, allow_inf=True)
    n, m = table.domain.n_bins, table.shape.m
    ks = np.arange(-m - 1, n + m + 2)
    return _ratio_report(_density_matrix(table, ks), ks, eps, tol)


def verify_composite_privacy(
    table: NoiseTable,
    eps: float,
    inputs=None,
    tol: float = 1e-6,
) -> PrivacyReport:
    """Privacy check on the full mechanism including randomized rounding.

    The output law for a real input x is the tent-weighted mixture of its two
    neighbouring rows; the mixture densities are evaluated exactly from the
    table at every output grid index and compared pairwise across a dense
    grid of real inputs.
    """
    eps = check_eps(eps, allow_inf=True)
    domain = table.domain
    if inputs is None:
        inputs = np.linspace(-domain.beta, domain.beta, 201)
    xs = np.asarray(inputs, dtype=float)
    n, m = domain.n_bins, table.shape.m
    ks = np.arange(-m - 1, n + m + 2)
    rows = _density_matrix(table, ks)
    idx, w_left = rounding_weights_array(domain, xs)
    weights = np.zeros((xs.size, n + 1))
    weights[np.arange(xs.size), idx] = w_left
    weights[np.arange(xs.size), np.minimum(idx + 1, n)] += 1.0 - w_left
    mixture = weights @ rows
    return _ratio_report(mixture, ks, eps, tol, labels=[float(v) for v in xs])


def sample_noise(table: NoiseTable, i: int, rng: np.random.Generator, size=None):
    """Draw noise offsets j from row i of the table.

    Three-part mixture: the window masses |j| < M directly; each tail as its
    total mass q[i][+-M]/(1-r) followed by a geometric offset beyond +-M.
    """
    if not 0 <= i <= table.domain.n_bins:
        raise ValueError("edge index out of range")
    m, r = table.shape.m, table.shape.r
    row = table.q[i]
    probs = row.copy()
    probs[0] = row[0] / (1.0 - r)
    probs[-1] = row[-1] / (1.0 - r)
    probs /= probs.sum()  # row invariants hold to 1e-7; renormalize exactly
    n_draws = 1 if size is None else int(size)
    cats = rng.choice(probs.size, size=n_draws, p=probs)
    j = cats - m
    right = cats == 2 * m
    left = cats == 0
    if right.any():
        j[right] = m + rng.geometric(1.0 - r, size=int(right.sum())) - 1
    if left.any():
        j[left] = -m - (rng.geometric(1.0 - r, size=int(left.sum())) - 1)
    return int(j[0]) if size is None else j


def adaptive_perturb(
    table: NoiseTable, domain: QuantizedDomain, x: float, rng: np.random.Generator
) -> float:
    """Perturb one value: randomized-round to an edge, add table noise."""
    return float(adaptive_perturb_array(table, domain, [x], rng)[0])


def adaptive_perturb_array(
    table: NoiseTable, domain: QuantizedDomain, xs, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized perturbation; clients are processed in data order, with
    noise drawn per rounded-edge group in fixed edge order (deterministic
    for a given stream)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    idx = round_randomized_array(domain, xs, rng)
    offsets = np.zeros(xs.size, dtype=np.int64)
    for i in range(domain.n_bins + 1):
        mask = idx == i
        count = int(mask.sum())
        if count:
            offsets[mask] = sample_noise(table, i, rng, size=count)
    return domain.edges[idx] + domain.sigma * offsets


def run_protocol(
    data,
    eps: float,
    split_ratio: float,
    shape: NoiseShape,
    domain: QuantizedDomain,
    rng: np.random.Generator,
    split_mask=None,
    backend: str = "auto",
) -> ProtocolResult:
    """Two-phase mean estimation.

    Each client lands in phase 1 with probability split_ratio.  Phase 1
    estimates the quantized pmf with randomized response at the full budget
    eps; the noise table is solved against that estimate; phase-2 clients
    perturb with the table and the mean estimate is the plain average of
    their reports.  A precomputed split_mask (True = phase 1) can be passed
    so several mechanisms share one partition.
    """
    eps = check_eps(eps, allow_inf=True)
    if not (0.0 < split_ratio < 1.0):
        raise ValueError("split_ratio must lie in (0, 1)")
    xs = np.atleast_1d(np.asarray(data, dtype=float))
    if xs.size == 0:
        raise ValueError("data must be nonempty")
    if split_mask is None:
        split_mask = rng.random(xs.size) < split_ratio
    else:
        split_mask = np.asarray(split_mask, dtype=bool)
        if split_mask.shape != xs.shape:
            raise ValueError("split_mask shape does not match data")
    phase1 = xs[split_mask]
    phase2 = xs[~split_mask]
    if phase1.size == 0 or phase2.size == 0:
        raise ValueError(
            f"degenerate split: {phase1.size} phase-1 / {phase2.size} phase-2 clients"
        )
    hist = collect_perturbed_histogram(domain, phase1, eps, rng)
    pmf_hat = reconstruct_pmf(hist, build_rr_matrix(domain.n_bins, eps))
    table = solve_noise_table(pmf_hat, eps, shape, domain, backend=backend)
    reports = adaptive_perturb_array(table, domain, phase2, rng)
    return ProtocolResult(
        mean_estimate=float(reports.mean()),
        phase1_pmf=pmf_hat,
        noise_table=table,
        phase1_count=int(phase1.size),
        phase2_count=int(phase2.size),
        lp_objective=table.lp_objective,
    )


def save_table(table: NoiseTable, path) -> None:
    """Plain-text dump: one header line (beta, N, M, r, eps), then N+1 rows
    of 2M+1 window masses.  repr round-trips floats bit-exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{table.domain.beta!r} {table.domain.n_bins} "
            f"{table.shape.m} {table.shape.r!r} {table.eps!r}\n"
        )
        for row in table.q:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_table(path) -> NoiseTable:
    from .domain import make_domain

    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise ValueError(f"malformed noise-table header in {path}")
        beta, n, m, r, eps = (
            float(header[0]),
            int(header[1]),
            int(header[2]),
            float(header[3]),
            float(header[4]),
        )
        q = np.loadtxt(fh, ndmin=2)
    if q.shape != (n + 1, 2 * m + 1):
        raise ValueError(
            f"noise-table body is {q.shape}, expected {(n + 1, 2 * m + 1)}"
        )
    return NoiseTable(
        domain=make_domain(beta, n), shape=NoiseShape(m=m, r=r), q=q, eps=eps
    )
