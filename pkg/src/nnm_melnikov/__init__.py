"""Backbone curves, Melnikov persistence and forced-response validation for mechanical systems."""

from .exceptions import (
    ConfigError,
    ContinuationError,
    ConvergenceError,
    DegeneracyError,
    DomainError,
    IntegrationError,
    NNMError,
    SingularMassError,
)
from .family import (
    OrbitFamily,
    PeriodicOrbit,
    ShootingOptions,
    classify_normality,
    continue_family,
    find_periodic_orbit,
    seed_from_linear_mode,
)
from .flow import integrate, integrate_with_variations
from .frc import (
    check_persistence,
    continue_frc,
    energy_balance,
    forced_periodic_orbit,
    track_folds,
    validate_predictions,
)
from .melnikov import classify_orbit_bifurcation, melnikov_general, work_and_resistance
from .model import (
    CustomModel,
    FirstOrderSystem,
    PerturbationSpec,
    PolynomialOscillator,
    SpringChain,
    builtin_model,
)
from .ridge import build_ridge, modal_ridge, phase_lag, predict_peaks

__version__ = "0.1.0"
