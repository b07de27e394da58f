"""Greedy Haar approximation and democracy functions in variable Lebesgue spaces on [0,1)^n."""

__version__ = "0.1.0"

from .democracy_lab import (
    STRATEGIES,
    DemocracyRecord,
    DemocracyRow,
    construct_gamma1,
    construct_gamma2,
    democracy_norm,
    estimate_democracy,
    fit_exponent,
    gamma1_lower_check,
    gamma2_upper_check,
    indicator_sum_norm,
    linearized_norm,
    sandwich_battery,
    square_sum_norm,
)
from .dyadic_grid import (
    CubeFamily,
    DyadicCube,
    GridFunction,
    LightShadeDecomposition,
    enumerate_cubes,
    integrate,
    light_shade,
    measure,
    minimal_cube_map,
)
from .errors import (
    AlignmentError,
    CapacityError,
    ConfigError,
    ContainmentError,
    EmptyRegionError,
    FitError,
    InvalidExponentError,
    InvalidInputError,
    InvalidParameterError,
    InvalidRangeError,
    OutOfDomainError,
    ResolutionError,
    UndefinedRatioError,
    VLGreedyError,
)
from .exponent_field import (
    ExponentField,
    LevelSets,
    build_exponent,
    conjugate,
    constant_exponent,
    exponent_range,
    harmonic_mean_exponent,
    level_sets,
    log_holder_constant,
    step_exponent,
)
from .fitting import FitResult, loglog_fit
from .greedy_approx import (
    ApproximationProfile,
    GreedyOrdering,
    MonotonicityWarning,
    SubsetOracle,
    best_subset_residual,
    greedy_approximant,
    greedy_order,
    greedy_residual,
    lebesgue_profile,
)
from .haar_system import (
    BasisLabel,
    HaarCoefficients,
    analyze,
    basis_labels,
    basis_norm,
    equivalence_ratio,
    square_function,
    synthesize,
    wavelet,
)
from .variable_norm import (
    EmbeddingReport,
    char_norm,
    cube_norm,
    dyadic_maximal,
    embedding_checks,
    holder_defect,
    luxemburg_norm,
    modular,
    norm_decay_exponent,
)
