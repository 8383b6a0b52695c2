"""Numerical laboratory for the FPU and Toda chains, their KdV limit, and Gibbs ensembles."""

from fpulab.errors import (
    BlowUpError,
    CalibrationError,
    DomainError,
    FPULabError,
    InsufficientDataError,
    InvalidInputError,
    NumericalError,
    StabilityError,
)
from fpulab.lattice import DIRICHLET, FPU, PERIODIC, TODA, ChainParams, LatticeState

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "CalibrationError",
    "ChainParams",
    "DIRICHLET",
    "DomainError",
    "FPU",
    "FPULabError",
    "InsufficientDataError",
    "InvalidInputError",
    "LatticeState",
    "NumericalError",
    "PERIODIC",
    "StabilityError",
    "TODA",
]
