"""Global and local minimizers of a nonlinear Timoshenko beam under distributed load."""

__version__ = "0.1.0"

from .model import (BeamParams, DimensionError, Grid, PhiField, PlanarCurve, ThetaField, energy_euler,
                    energy_full, gradient_euler, gradient_full, reconstruct_chi)
from .obstacle import NotDefined, ObstacleSpec, phi_star, project_obstacle, touch_set, x_lambda
from .solvers import (MinimizerResult, SolveOptions, el_residual, euler_el_residual, minimize_constrained,
                      minimize_euler_constrained, minimize_reduced, perturbation_audit)
from .theta import (BandIndex, PointwiseProblem, band_classify, detect_theta_jump, pointwise_theta_argmin,
                    theta_map)
