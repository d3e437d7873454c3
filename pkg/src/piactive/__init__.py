"""Dimension reduction for physical models: Buckingham Pi groups and active subspaces."""

from .models import HartmannModel, ParameterSpace, QuadraticModel, RidgeModel, hartmann_space, synthetic_ridge
from .subspace import (
    GradientSampleSet,
    Spectrum,
    eigendecompose,
    estimate_c_from_samples,
    estimate_c_monte_carlo,
    estimate_c_quadrature,
    select_dimension,
    subspace_distance,
)
from .units import QuantitySystem, parse_unit_expression, pi_groups

__version__ = "0.1.0"
