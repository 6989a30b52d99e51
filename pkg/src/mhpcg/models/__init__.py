"""Target models, data simulators and the named sampler registry."""
from .bivariate import BivariateNormalModel
from .calibration import (
    CALIBRATION_START,
    CALIBRATION_TRUTH,
    CalibrationModel,
    baseline_area,
    calibration_energies,
    load_basis,
    save_basis,
    simulate_calibration,
    synthesize_pca_basis,
)
from .factor import FACTOR_START, FactorModel, sigma_names, simulate_factor
from .gaussian import GaussianModel
from .registry import EXECUTABLE, PARENTS, VALIDATOR_ONLY, get_sampler, parent_of, sampler_registry
from .spectral import (
    FIG3_PARAMS,
    SPECTRAL_COMPONENTS,
    SPECTRAL_START,
    SpectralModel,
    energy_grid,
    expected_counts,
    simulate_spectral,
)

__all__ = [
    "BivariateNormalModel",
    "GaussianModel",
    "SpectralModel",
    "CalibrationModel",
    "FactorModel",
    "FIG3_PARAMS",
    "SPECTRAL_COMPONENTS",
    "SPECTRAL_START",
    "CALIBRATION_START",
    "CALIBRATION_TRUTH",
    "FACTOR_START",
    "energy_grid",
    "expected_counts",
    "simulate_spectral",
    "calibration_energies",
    "baseline_area",
    "synthesize_pca_basis",
    "save_basis",
    "load_basis",
    "simulate_calibration",
    "sigma_names",
    "simulate_factor",
    "sampler_registry",
    "get_sampler",
    "parent_of",
    "EXECUTABLE",
    "VALIDATOR_ONLY",
    "PARENTS",
]
