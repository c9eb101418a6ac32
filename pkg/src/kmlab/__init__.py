"""kmlab: stochastic particle lab for homogeneous kinetic equations.

Simulates the one-dimensional and Maxwell-molecule collision models with a
Nanbu-style particle scheme, computes the angular constants and cancellation
sequences of the collision kernels, evolves the closed moment ODE hierarchy
with its constructive uniform bounds, and numerically verifies the angular
averaging and auxiliary inequalities the bounds rest on.
"""

from .errors import AccuracyError, BlowUpError, ConfigError, KMError
from .special_fn import MLSpec, MLValue

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "BlowUpError",
    "ConfigError",
    "KMError",
    "MLSpec",
    "MLValue",
    "__version__",
]
