"""Simulation and analysis of stochastic population dynamics on a network of patches.

The model for the abundances ``X_i`` in ``n`` patches is

    dX_i = (X_i (a_i - b_i(X_i)) + sum_j D_ji X_j) dt + X_i dE_i,

with ``E = gamma W`` a correlated Brownian motion.  The sign of the
stochastic growth rate ``r`` separates persistence from extinction.
"""

from .analysis import (
    classify,
    convergence_distance,
    dispersal_limit_table,
    extinction_slopes,
    occupation_fraction,
    sync_diagnostics,
)
from .lyapunov import LyapunovEstimate, r_best, r_closedform_2patch, r_logslope, r_timeavg
from .model import (
    ExplicitGamma,
    Linear,
    ModelSpec,
    PowerLaw,
    SigmaCorrelation,
    Tabulated,
    build_gamma,
    effective_sigma,
    single_patch,
    two_patch,
    validate_spec,
)
from .reduce1d import reduce_2patch, stationary_density, ystar
from .robustness import PerturbationSpec, perturb_spec, persistence_under_perturbation, r_continuity_scan
from .sde import SimConfig, simulate_linearized_logS, simulate_logistic_1d, simulate_simplex, simulate_x

__version__ = "0.1.0"
