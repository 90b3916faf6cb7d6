"""contlab: a virtual workbench for experimental continuation methods
on black-box nonlinear oscillator plants, with a harmonic-balance
reference engine for validation."""

__version__ = "0.1.0"

from ._kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
