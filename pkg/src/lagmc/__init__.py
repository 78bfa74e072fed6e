"""Numerical laboratory for Lagrangian mean curvature type equations
``sum arctan lambda_i(D^2u) = theta(x, u, Du)``."""

from . import _kernels
from .errors import (ConfigError, DimensionError, InvalidFamilyError, InvalidInputError,
                     InvalidPhaseError, LagmcError, RotationDegenerateError, SolverFailure,
                     StabilityError)
from .grid import Grid, ScalarField
from .spectral import (Spectrum, SymMatrix, critical_phase, eigen_decompose, lagrangian_phase,
                       phase_regime, sigma_all, sigma_k)

__version__ = "0.1.0"
BACKEND = _kernels.BACKEND

__all__ = ["ConfigError", "DimensionError", "InvalidFamilyError", "InvalidInputError",
           "InvalidPhaseError", "LagmcError", "RotationDegenerateError", "SolverFailure",
           "StabilityError", "Grid", "ScalarField", "Spectrum", "SymMatrix", "critical_phase",
           "eigen_decompose", "lagrangian_phase", "phase_regime", "sigma_all", "sigma_k",
           "BACKEND", "__version__"]
