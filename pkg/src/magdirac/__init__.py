"""Semiclassical magnetic Schrodinger spectral kernels, Dirac energies and drift geometry."""
from . import dirac_energy, dynamics, harness, kernels, landau, perturbation, regimes, specfun
from ._accel import backend
from .errors import (AccuracyError, ConfigError, InsufficientDataError, IntegrationError,
                     InvalidInputError, MagdiracError, NumericalError, SymmetryError,
                     TruncationError)

__version__ = "0.1.0"

__all__ = ["specfun", "landau", "kernels", "dirac_energy", "dynamics", "perturbation", "regimes",
           "harness", "backend", "MagdiracError", "InvalidInputError", "ConfigError",
           "NumericalError", "TruncationError", "AccuracyError", "SymmetryError",
           "IntegrationError", "InsufficientDataError"]
