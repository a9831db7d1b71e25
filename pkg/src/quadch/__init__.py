"""Structure-preserving spectral solvers for Cahn-Hilliard dynamics.

Rational-like free energies are quadratized with auxiliary variables whose
constraints the implicit-midpoint step preserves exactly, so the fully
discrete isotropic and anisotropic schemes dissipate the original discrete
energy and conserve mass.  The package also ships the linear-stability and
coarsening analysis toolbox and a reproducible experiment runner.
"""

__version__ = "0.1.0"

from .grid import (Grid, GridField, SpectralWorkspace, bilaplacian, dx, dy,
                   get_workspace, inner_h, laplacian, mean, norm_h,
                   trilaplacian)
from .fixedpoint import (FixedPointConfig, LinearSymbol, SolveReport,
                         apply_T, build_symbol_aniso, build_symbol_iso,
                         mann_solve)
from .quadratize import (AuxVar, ExtendedOde, QuadratizedSystem, RationalExpr,
                         casimir_residual, lift, midpoint_step, quadratize,
                         quadratize_monomial, quadratize_reciprocal,
                         quadratize_root)
from .ch_iso import (IsoState, ModelParams, energy_iso, energy_iso_fform,
                     init_iso, iso_residual, iso_step, mu_iso)
from .ch_aniso import (AnisoParams, AnisoState, GammaSpec, aux_update,
                       aniso_step, energy_aniso, gamma_from_y6, init_aniso,
                       mu_aniso)
from .analysis import (DispersionSpec, OrientationHistogram, PotentialSpec,
                       amplification, coarsening_slope, critical_alpha,
                       lambda_aniso, lambda_iso, orientation_histogram,
                       spinodal_classify, stiffness, temporal_order,
                       unstable_band)
from .runner import (ExperimentConfig, RunArtifacts, load_field, make_initial,
                     run_experiment, run_preset, save_field)
