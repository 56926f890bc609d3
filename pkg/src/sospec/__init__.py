"""Second order relative spectra of self-adjoint operators."""
from .errors import *  # noqa: F401,F403
from .pencil import (ClusterConfig, Linearization, MatrixModel, OperatorModel,  # noqa: F401
                     PencilTriple, SecondOrderSpectrum, SpectralPoint, assemble_pencil,
                     galerkin_spectrum, linearize, mobius_image, second_order_spectrum,
                     sigma, sigma_map)

__version__ = "0.1.0"
