"""Fluctuation-limit simulation engine for noisy heat equations.

Simulates u_t = F + sqrt(eps) int G(a, y, u) W(ds da) + int u_yy / 2 ds for
super-Brownian motion, Fleming-Viot and tabulated noise coefficients. It
compares Monte-Carlo fluctuation statistics with quadrature of the limiting
Gaussian covariances.
"""

__version__ = "0.1.0"

from .grid import GridSpec, build_axes, trapezoid_weights
from .kernel import FVP, SBM, GKernelSpec, custom_table
from .testfn import TestFunction, gaussian_bump, hermite_damped, plateau

__all__ = [
    "GridSpec", "build_axes", "trapezoid_weights", "FVP", "SBM", "GKernelSpec", "custom_table",
    "TestFunction", "gaussian_bump", "hermite_damped", "plateau", "__version__",
]
