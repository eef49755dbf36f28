"""Nehari-manifold ground states of the cylindrically reduced nonlinear curl-curl equation."""

from .analysis import (
    C_EMB,
    C_HARDY,
    DecayReport,
    InequalityReport,
    check_embedding,
    check_hardy,
    check_nonexpansivity,
    coercivity_lambda_min,
    decay_constant,
)
from .fields import (
    Nonlinearity,
    Potential,
    energy_J,
    log_nonlinearity,
    nehari_residual,
    nonlinear_I,
    nonlinear_Iprime,
    norm_V,
    pde_residual,
    power_nonlinearity,
    validate_nonlinearity,
)
from .grid import CylField, Grid, build_grid, gradient, integrate_r1, integrate_r3
from .nehari import SolverConfig, SolveReport, ground_state_solve, minimizing_step_diagnostics, nehari_scale, project
from .reconstruct3d import VectorField3D, curlcurl_residual, divergence, reconstruct
from .symmetry import SymmetryReport, check_rearrangement, is_reversed_steiner, steiner_symmetrize

__version__ = "0.1.0"
