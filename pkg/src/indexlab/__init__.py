"""Numerical laboratory for the analytic and topological index over finite-dimensional C*-algebras."""

from . import tolerances
from .cstar_k0 import Algebra, AMatrix, K0Class, k0_of_projection
from .clifford import build_clifford, clifford_c
from .bott import OscillatorConfig, build_bott, bott_index
from .quantize import PhaseFunction, QuantizationGrid, phi_t
from .elliptic import analytic_index, morphism_index, topological_index_torus, twisted_dirac_torus

__version__ = "0.1.0"
