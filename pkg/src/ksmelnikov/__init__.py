"""Adjoint-based Melnikov analysis of the Kuramoto-Sivashinsky equation.

Pipeline: Fourier-Galerkin truncation -> steady states -> approximate
homoclinic orbit by shooting -> bounded adjoint profile -> deterministic
Melnikov coefficients and zeros under periodic forcing -> stochastic
Melnikov distribution under white noise, plus CSV emitters for the six
standard diagnostic figures.
"""

from .kernels import BACKEND
from .spectral import DomainConfig, ModalState, RealField

__version__ = "0.1.0"

__all__ = ["BACKEND", "DomainConfig", "ModalState", "RealField", "__version__"]
