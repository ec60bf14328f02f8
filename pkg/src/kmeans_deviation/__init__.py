"""Uniform-deviation toolkit for k-means quantization error.

Sample-size calculators under kurtosis / higher-moment / subgaussian /
bounded-support assumptions, the envelope-function machinery backing them,
seeded distribution samplers with analytic moments, and a Monte Carlo
harness that measures empirical-vs-expected deviation over adversarial
candidate solutions and fits its decay rate in the sample size.
"""

from .bounds import (
    BoundQuery,
    BoundResult,
    choose_p_star,
    compute_bound,
    pdim_bound,
    sample_size_bounded,
    sample_size_framework,
    sample_size_kurtosis,
    sample_size_moment,
    sample_size_subgaussian,
    verify_aux_constants,
)
from .deviation import (
    DeviationRecord,
    ExperimentConfig,
    RateFit,
    SweepResult,
    counterexample_bernoulli,
    counterexample_divergence,
    counterexample_scaling,
    fit_rate,
    joint_scale_check,
    measure_cell,
    rate_sweep,
    records_to_csv,
    sweep_summary,
)
from .distributions import (
    DistributionSpec,
    MomentProfile,
    analytic_profile,
    bernoulli,
    empirical,
    format_spec_string,
    gaussian,
    gaussian_mixture,
    load_empirical_csv,
    pareto,
    parse_spec_string,
    sample,
    scale_spec,
    student_t,
    uniform_ball,
)
from .errors import (
    AssumptionUnavailableError,
    DegenerateSampleError,
    InvariantViolationError,
    PreconditionError,
)
from .moments import (
    EmpiricalMoments,
    envelope,
    envelope_second_moment,
    estimate_moments,
    moors_identity_check,
)
from .quantization import (
    CenterSet,
    dist2,
    empirical_error,
    expected_error,
    kmeans_pp,
    lloyd,
    normalized_loss,
)

__version__ = "0.1.0"
