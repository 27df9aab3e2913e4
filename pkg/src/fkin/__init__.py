"""Closed-form solutions of fractional kinetic equations, the fundamental
solution of time-fractional diffusion, and the numerical cross-checks that
keep both honest.

The closed forms are built on the three-parameter Mittag-Leffler function;
every solver route can be compared against two independent references (a
contour inversion of the exact Laplace image and a product-integration time
stepper) through :mod:`fkin.verification` or the ``fkin`` command line.
"""

from .errors import (
    ConfigError,
    DomainError,
    FkinError,
    NonConvergence,
    NotSupported,
    OracleFailure,
    ResourceError,
    SingularStep,
    SolverError,
    TruncationWarning,
)
from .specfun import (
    MLParams,
    SeriesControls,
    gamma_recip,
    ml_one,
    ml_prabhakar,
    ml_two,
    pochhammer,
)
from .fracops import (
    ConvolutionControls,
    MLModulator,
    SampledFunction,
    laplace_of_interpolant,
    rl_integral,
    rl_integral_grid,
    singular_convolution,
    singular_convolution_grid,
)
from .kinetics import (
    KineticProblem,
    MLForcing,
    PowerLaw,
    Sampled,
    TruncationPolicy,
    Unit,
    binomial_problem,
    geometric_problem,
    laplace_domain,
    residual_grid,
    select_solver,
    solve_arithmetic,
    solve_binomial,
    solve_geometric,
    solve_ml_closed,
    solve_multiterm,
    solve_multiterm_grid,
    solve_power_closed,
    solve_single_term,
)
from .oracles import (
    StepperControls,
    TalbotControls,
    forward_laplace,
    invert_laplace,
    laplace_image,
    volterra_solve,
)
from .diffusion import (
    DiffusionProblem,
    StableParams,
    asymptotic_n2,
    fundamental_solution,
    levy_density,
    series_n1,
    series_n3,
)
from .verification import (
    CriterionResult,
    VerificationReport,
    canonical_problems,
    criterion_names,
    run_all,
    verify_problem,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvolutionControls",
    "CriterionResult",
    "DiffusionProblem",
    "DomainError",
    "FkinError",
    "KineticProblem",
    "MLForcing",
    "MLModulator",
    "MLParams",
    "NonConvergence",
    "NotSupported",
    "OracleFailure",
    "PowerLaw",
    "ResourceError",
    "Sampled",
    "SampledFunction",
    "SeriesControls",
    "SingularStep",
    "SolverError",
    "StableParams",
    "StepperControls",
    "TalbotControls",
    "TruncationPolicy",
    "TruncationWarning",
    "Unit",
    "VerificationReport",
    "asymptotic_n2",
    "binomial_problem",
    "canonical_problems",
    "criterion_names",
    "forward_laplace",
    "fundamental_solution",
    "gamma_recip",
    "geometric_problem",
    "invert_laplace",
    "laplace_domain",
    "laplace_image",
    "laplace_of_interpolant",
    "levy_density",
    "ml_one",
    "ml_prabhakar",
    "ml_two",
    "pochhammer",
    "residual_grid",
    "rl_integral",
    "rl_integral_grid",
    "run_all",
    "select_solver",
    "series_n1",
    "series_n3",
    "singular_convolution",
    "singular_convolution_grid",
    "solve_arithmetic",
    "solve_binomial",
    "solve_geometric",
    "solve_ml_closed",
    "solve_multiterm",
    "solve_multiterm_grid",
    "solve_power_closed",
    "solve_single_term",
    "verify_problem",
    "volterra_solve",
]
