"""Numerical toolkit for the anisotropic fractional Laplacian Δ^{β,α}.

Submodules: :mod:`geometry` (quasi-norms, dilations, sphere grids),
:mod:`operator` (quadrature for Δ^{β,α}u), :mod:`barrier` (barrier
fields and the positivity sweep), :mod:`homogeneous` (critical exponent
γ* and the fundamental solution), :mod:`norms` (averages, seminorms,
Bessel norms) and :mod:`cli`.
"""

from .barrier import barrier_gradient, barrier_hessian, barrier_sweep
from .errors import (AnisofracError, BracketError, ConfigError, DomainError, ParameterError, QuadratureError,
                     SolverError)
from .geometry import (Anisotropy, SphereGrid, build_sphere_grid, cbl_distance, ellipsoid_volume, make_anisotropy,
                       project_to_sphere, quasi_norm, scale_map)
from .homogeneous import fundamental_solution, gamma_star
from .norms import PeriodicSample, bessel_norm, embedding_ratio
from .operator import Field, QuadratureConfig, eval_operator

__version__ = "0.1.0"

__all__ = [
    "AnisofracError", "BracketError", "ConfigError", "DomainError", "ParameterError", "QuadratureError",
    "SolverError",
    "Anisotropy", "SphereGrid", "build_sphere_grid", "cbl_distance", "ellipsoid_volume", "make_anisotropy",
    "project_to_sphere", "quasi_norm", "scale_map",
    "Field", "QuadratureConfig", "eval_operator",
    "barrier_gradient", "barrier_hessian", "barrier_sweep",
    "gamma_star", "fundamental_solution",
    "PeriodicSample", "bessel_norm", "embedding_ratio",
]
