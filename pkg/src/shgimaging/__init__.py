"""Second-harmonic wave imaging of a small reflector in a 2D random medium.

Subpackages
-----------
specfun   Bessel/Hankel functions and the Helmholtz Green function
medium    random-medium realizations
forward   boundary-data synthesis (fundamental and second harmonic)
imaging   backpropagation functionals, kernels, localization
stats     predictors and Monte Carlo sweeps
cli       command-line front end
"""

from .errors import (
    ConfigError,
    DomainError,
    FormatError,
    IoError,
    NoPeakError,
    ResolutionError,
    ShgError,
    SingularityError,
)

__all__ = [
    "ShgError",
    "DomainError",
    "SingularityError",
    "ResolutionError",
    "ConfigError",
    "FormatError",
    "NoPeakError",
    "IoError",
]

__version__ = "0.1.0"
