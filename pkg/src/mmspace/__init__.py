"""Numerical toolkit for finite metric measure spaces: mean oscillations,
weak-type and Besov norms, Hajlasz gradients, ball-average mollifiers,
Poincare constants and constancy detection."""
from .space import (Space, SpaceError, build_space, generate, grid, graph,
                    heisenberg, snowflake, ball, doubling_and_dimension)
from .oscillation import (ball_average, mean_oscillation, profile, lip_hat, g_hat,
                          maximal)
from .norms import besov_seminorm, commutator_besov, level_measure, weak_norm, kappa_curve_tail
from .hajlasz import (GradientCertificate, solve_exact, maximal_gradient,
                      lipschitz_truncate)
from .mollify import t_net, partition, mollify, verify_mollifier_bounds
from .fields import make_field

__version__ = "0.1.0"
