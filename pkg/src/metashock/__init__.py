"""Numerical laboratory for slow shock-layer motion under saturating diffusion.

Subpackages by theme:

* ``core``     problem types, fluxes, the existence gate, config parsing
* ``steady``   monotone steady profiles via flux-balance quadrature
* ``evolve``   conservative finite-volume time stepping and diagnostics
* ``family``   the one-parameter family of near-steady interface profiles
               and the reduced interface ODE
* ``spectral`` linearization around a profile and its low-lying spectrum
* ``cli``      batch runner writing delimited output plus figures
"""

__version__ = "0.1.0"

from . import core, errors

__all__ = ["core", "errors", "__version__"]
