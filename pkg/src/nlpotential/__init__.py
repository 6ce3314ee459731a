"""Numerical n-Laplacian potential theory: measure-data solves, Wolff
potentials, conformal capacity, thinness series, blow-down asymptotics,
exponential integrability and conformal/hypersurface geometry checks."""

from .capacity import Condenser, radial_capacity
from .fields import Grid, RadonMeasure, ScalarField, ball_volume, sphere_area
from .nlaplace import DirichletProblem, flux_through_sphere, solve_dirichlet
from .thinness import PointSet, Verdict, thinness_series
from .wolff import wolff_field, wolff_potential

__all__ = [
    "Condenser", "radial_capacity", "Grid", "RadonMeasure", "ScalarField", "ball_volume",
    "sphere_area", "DirichletProblem", "flux_through_sphere", "solve_dirichlet", "PointSet", "Verdict",
    "thinness_series", "wolff_field", "wolff_potential",
]
__version__ = "0.1.0"
