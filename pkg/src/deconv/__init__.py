"""Kernel deconvolution estimators under super-smooth measurement error."""

from .asymptotics import (
    BandwidthSchedule,
    ConditionA,
    ConditionAClass,
    LimitLaw,
    classify_condition_a,
    lattice_neighbors,
    laplace_asymptotic,
    laplace_exact,
    limit_law,
    make_schedule,
    tau_n_eval,
)
from .distributions import NoiseModel, TargetModel, convolved_density, parse_noise, parse_target
from .estimator import (
    EstimateResult,
    Sample,
    cauchy_closed_form,
    centered_stats,
    estimate_cdf,
    estimate_density,
    estimate_interval,
    exact_interval_variance,
    exact_term_variance,
    expected_density,
    expected_interval,
)
from .harness import ExperimentConfig, MonteCarloReport, ks_normal_test, rate_sweep, report_io, run_experiment
from .kernels import KERNELS, KernelSpec, condition_w_params, get_kernel, kernel_w_eval, phi_w_eval
from .numerics import QuadratureSpec, ScaledValue, integrate_scaled, scaled_add, scaled_mul, scaled_normalize

__version__ = "0.1.0"
