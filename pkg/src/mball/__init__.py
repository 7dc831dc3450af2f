"""Weighted polynomial quantities on the unit ball.

Orthonormal bases, differentiation matrices, Christoffel functions,
reproducing and needle kernels, and the worst/average Markov factor
experiments built on them.
"""

__version__ = "0.1.0"

from .geometry import Point, SeparatedSet, dist, dist_tilde, maximal_separated_set, sphere_dist
from .polyspace import OrthoBasis, Poly, orthonormal_basis, poly_space_dim
from .weights import Weight, ball_measure, jacobi_weight, parse_weight, product_weight, step_weight

__all__ = [
    "Point",
    "SeparatedSet",
    "dist",
    "dist_tilde",
    "sphere_dist",
    "maximal_separated_set",
    "Weight",
    "jacobi_weight",
    "product_weight",
    "step_weight",
    "parse_weight",
    "ball_measure",
    "Poly",
    "OrthoBasis",
    "orthonormal_basis",
    "poly_space_dim",
    "__version__",
]
