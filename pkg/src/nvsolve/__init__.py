"""Vector-generic numerical solvers for ODE and DAE initial-value problems.

Subpackages follow the layering of the library: :mod:`vector` and
:mod:`matrix` hold data, :mod:`linsolver` and :mod:`nonlinear` solve the
inner systems, and :mod:`ode` and :mod:`dae` are the integrators.
"""

from . import bench, dae, errors, linsolver, matrix, nonlinear, ode, pendulum, rootfind, vector

__all__ = ["bench", "dae", "errors", "linsolver", "matrix", "nonlinear", "ode", "pendulum",
           "rootfind", "vector"]
__version__ = "0.1.0"
