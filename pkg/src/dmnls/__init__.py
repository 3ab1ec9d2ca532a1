"""Numerical toolkit for the nonlinear Schrodinger equation with periodic dispersion management."""

from .dispersion_map import DispersionMap, InadmissibleMapError, big_gamma, cover_intervals, covering_bound
from .experiments import ExperimentSpec, ResultReport, run
from .ground_state import GroundStateProfile, solve_Q, solve_Q_petviashvili
from .spectral_engine import ComplexField, RadialGrid3D, SplitStepConfig, TorusGrid1D, evolve, norms

__version__ = "0.1.0"

__all__ = [
    "DispersionMap",
    "InadmissibleMapError",
    "big_gamma",
    "cover_intervals",
    "covering_bound",
    "ExperimentSpec",
    "ResultReport",
    "run",
    "GroundStateProfile",
    "solve_Q",
    "solve_Q_petviashvili",
    "ComplexField",
    "RadialGrid3D",
    "TorusGrid1D",
    "SplitStepConfig",
    "evolve",
    "norms",
]
