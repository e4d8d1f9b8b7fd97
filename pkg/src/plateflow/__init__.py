"""Mixed finite elements for a Stokes flow coupled to a clamped plate.

The package solves the static resolvent system of a three-dimensional
Stokes fluid interacting with a fourth-order clamped plate on the top
face of the fluid box.  The plate unknown is discretized with quintic
Argyris elements, the fluid with Taylor-Hood P2/P1 elements, and the two
are coupled through discrete Stokes solution maps inside a constrained
(saddle-point) plate problem.  A manufactured polynomial solution drives
the convergence verification harness.
"""

from .meshing import build_cube_mesh, build_square_mesh, refine
from .quadrature import QuadratureRule, tet_rule, triangle_rule
from .argyris import (ArgyrisSpace, PlateField, assemble_bending,
                      assemble_mass, build_space, discrete_infsup_constant,
                      interpolate, solve_xi)

__version__ = "0.1.0"
