"""wickstat: spectral simulation and singularity detection on the torus.

The package builds up in layers: exact Fourier calculus on a ball-shaped
mode lattice (`fourier`), Hermite/Wick combinatorics (`wick`), model
parameters and multiplier symbols (`model`), the stationary linear field
(`ou`), exponents and renormalization constants (`renorm`), the coupled
nonlinear dynamics (`dynamics`), dyadic regularity estimation (`besov`),
and the detection statistic and experiment driver (`detector`).
"""

__version__ = "0.1.0"

from .fourier import (
    TWO_PI,
    AliasingError,
    Lattice,
    PhysicalGrid,
    SpectralField,
    dealiased_grid_size,
    from_physical,
    multiplier_weight,
    torus_integral_of_polynomial,
)
from .wick import (
    chaos_product_projection,
    hermite_coefficients,
    hermite_eval,
    hermite_orthogonality,
    isserlis_moment,
    pairing_expectation,
    permanent,
    wick_monomial,
)
from .model import ModelParams, evaluate_symbol, symbol_is_real_operator
from .rng import RngStream
from .ou import (
    coeffs_from_draws,
    draw_block_shape,
    hermitian_gaussian,
    mode_rates,
    mode_variances,
    ou_step,
    sample_stationary,
    stationary_mode_variance,
    two_time_covariance,
)
from .renorm import (
    ExponentReport,
    GrowthFit,
    QuadratureError,
    Regime,
    RegimeVerdict,
    RenormConstants,
    classify_regime,
    conv_bound_ratio,
    critical_alpha,
    divergence_rate,
    exponent_report,
    first_order_constant,
    forcing_regularity,
    growth_rate_fit,
    iterated_conv_admissible,
    renorm_constants,
    second_order_constant,
    second_order_constant_fast,
)
from .dynamics import (
    BlowupError,
    CoupledSample,
    EnsembleResult,
    SimConfig,
    filtered_covariance,
    heun_weight,
    phi1,
    phi2,
    simulate_ensemble,
    wick_nonlinearity,
)
from .besov import (
    DyadicPartition,
    RegularityFit,
    besov_norm,
    block_norms,
    default_fit_blocks,
    estimate_regularity,
    lp_block,
    smooth_step,
    smoothing_check,
)
from .detector import (
    DEFAULT_N_GRID,
    DetectorSpec,
    ExperimentResult,
    StatisticTrace,
    TrendResult,
    choose_detector_spec,
    detector_statistic,
    expected_statistic_mean,
    experiment_constants,
    gamma_window,
    mann_kendall,
    run_experiment,
    statistic_trace,
)
from .presets import PRESETS, load_preset
