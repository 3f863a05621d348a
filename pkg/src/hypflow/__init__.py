"""Numerical toolkit for heat flow and mild Navier-Stokes scaling on hyperbolic 3-space.

Everything is dimensionless in units where the sectional curvature is -1.
"""

from .errors import IntegratorError, NumericalError, ParameterError

__all__ = ["IntegratorError", "NumericalError", "ParameterError"]
__version__ = "0.1.0"
