"""surfsde: stochastic degenerate diffusion on moving closed curves.

The package is organized around one pipeline: geometry of the moving curve
(`geometry`), the discrete negative-order Sobolev pivot space and its
time-dependent inner products (`spaces`), drift/diffusion models and their
structural-condition verifiers (`operators`), the time-dependent Galerkin
system and its simulation (`galerkin`), identity checkers for the energy
bookkeeping (`energy`), the flat moving-interval cross-validation solver
(`pullback`), and the experiment runner (`cli`).
"""

__version__ = "0.1.0"

from . import energy, galerkin, geometry, operators, pullback, spaces  # noqa: F401
