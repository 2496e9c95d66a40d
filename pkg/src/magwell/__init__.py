"""Numerical laboratory for 2D magnetic double-well operators.

Builds gauge-invariant discretizations of (P + (lam b/2) X_perp)^2 + lam^2 v,
computes hopping coefficients and eigenvalue splittings, tunes sophon-dressed
wells to zero splitting or zero hopping, and assembles the associated
tight-binding crystal with its band flatness diagnostics.
"""

__version__ = "0.1.0"

from .grid import (Grid2D, MagneticParams, DiscreteOperator, build_grid,
                   link_phase, assemble_operator, gauge_transform,
                   apply_operator, plaquette_fluxes, export_operator)
from .potentials import (PotentialSpec, RadialBump, HarmonicPatch, HarmonicGlobal,
                         SophonSite, SophonDressing, DoubleWellConfig,
                         radial_bump, unit_hessian_well, harmonic_well,
                         sophon_dress, rectangle_sophons, flatband_sophons,
                         double_well, check_inversion_symmetric)
from .spectral import (SpectralResult, ParitySplit, solve_lowest, dense_oracle,
                       parity_split, decay_fit, gap_isolation)

__all__ = [name for name in dir() if not name.startswith("_")]
