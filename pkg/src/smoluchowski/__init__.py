"""Truncated Smoluchowski coagulation with singular kernels.

A fixed-pivot sectional solver for the conservative (theta = 1) and
non-conservative (theta = 0) truncations of the coagulation equation,
together with certificates for computed trajectories: weak-form and
mass-balance residuals, explicit a priori bounds, and exact or
closed-form reference solutions.
"""
from .errors import (
    BlowUpError,
    ConfigError,
    DataError,
    DomainError,
    NumericalError,
    SmoluchowskiError,
    StiffnessError,
)
from .kernels import (
    Kernel,
    SampleSpec,
    TruncationParams,
    eval_kernel,
    eval_truncated,
    from_name,
    verify_hypotheses,
)
from .grid import (
    Density,
    DistributionState,
    Grid,
    build_grid,
    exponential_density,
    project_initial,
    weighted_norm,
)
from .solver import RunConfig, Trajectory, coagulation_rhs, run, step
from .convex import ConvexWeight, build_vallee_poussin, check_weight_properties
from .diagnostics import (
    BoundReport,
    Residual,
    TestFunction,
    check_apriori_bounds,
    equicontinuity_modulus,
    mass_balance_finite_q,
    tail_identity,
    weak_form_residual,
)
from .oracle import (
    OracleSpec,
    compare_oracle,
    constant_kernel_exact,
    gelation_time_estimate,
    moment_ode,
    reference_run,
)

__version__ = "0.1.0"
