"""Locally differentially private mean estimation.

A distribution-adaptive additive mechanism whose noise law is optimized by
linear programming against an estimated quantized data distribution, next to
the classical baselines (Laplace, two-point, piecewise, hybrid, randomized
response), with exact privacy verification and a seeded experiment harness.
"""

from .adaptive import (
    NoiseShape,
    NoiseTable,
    ProtocolResult,
    adaptive_perturb,
    build_lp,
    load_table,
    noise_mass,
    run_protocol,
    sample_noise,
    save_table,
    solve_noise_table,
    tail_first_moment,
    tail_second_moment,
    verify_composite_privacy,
    verify_privacy,
)
from .analysis import (
    baseline_expected_variance,
    claim3_bound,
    expected_variance,
    squared_error,
    variance_relative_error,
)
from .baselines import (
    duchi_conditional_variance,
    duchi_perturb,
    generalized_rr,
    hybrid_perturb,
    laplace_perturb,
    laplace_variance,
    piecewise_conditional_variance,
    piecewise_perturb,
)
from .data import (
    BetaDistribution,
    Dataset,
    ShiftedExponential,
    TruncatedGaussian,
    gen_bernoulli,
    gen_exponential_clipped,
    gen_gaussian_clipped,
    load_csv,
    true_pmf,
)
from .domain import (
    LinearTransform,
    QuantizedDomain,
    QuantizedPmf,
    empirical_quantized_pmf,
    make_domain,
    rescale_to,
    round_randomized,
    rounding_weights,
)
from .freqest import (
    build_rr_matrix,
    collect_perturbed_histogram,
    reconstruct_pmf,
    relative_error_bound,
)
from .multidim import (
    MultiDataset,
    assign_attributes,
    run_multidim_protocol,
)

__version__ = "0.1.0"
