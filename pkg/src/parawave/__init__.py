"""Periodic spectral and paradifferential tools for the water-wave Dirichlet-Neumann problem."""

from .errors import *  # noqa: F401,F403
from .spectral import Field, Grid, dealias_product, exact_product, sobolev_norm
from .paradiff import SymbolRep, paradiff_apply, paraproduct
from .dirichlet_neumann import DirichletNeumann, DNParams, dn_exact
from .wavedyn import WaveParams, WaveState, step_rk4

__version__ = "0.1.0"
