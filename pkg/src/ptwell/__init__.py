"""Numerics for PT-symmetric double-well Schrödinger operators.

The package discretizes ``P_eps = -h^2 Laplacian + V0 + i*eps*W`` on a box,
reduces the tunneling doublet to a 2x2 interaction matrix through contour
spectral projections, and locates the real-to-complex eigenvalue transition.
"""

from ptwell.errors import PtwellError
from ptwell.grid import Grid

__all__ = ["Grid", "PtwellError"]
__version__ = "0.1.0"
