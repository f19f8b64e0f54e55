"""Hydroelastic surface waves on the periodic line.

Pseudospectral simulator for an elastic sheet over deep water in the
surface formulation: the fluid interior enters only through the
Dirichlet-to-Neumann operator of the wavy domain, computed by a
Fourier-Chebyshev strip solver, and the surface pair (eta, u) is stepped
in its packed complex form.  Everything numerically claimed is covered
by a verification battery (``hesw verify all``).
"""

__version__ = "0.1.0"

from .spectral import Grid

__all__ = ["Grid", "__version__"]
