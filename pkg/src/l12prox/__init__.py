"""Closed-form proximal operators for the l1-2 penalty and solvers built on them."""

from .prox import (
    ThinSvd,
    phi_objective,
    prox_l1,
    prox_l12,
    prox_l12_numerical,
    prox_l1_minus_l21_rows,
    prox_nuc_minus_frob,
)
from .solvers import (
    L1,
    L12,
    NO_PENALTY,
    Penalty,
    SmoothObjective,
    SolverConfig,
    SolverTrace,
    estimate_lipschitz,
    solve_dca,
    solve_fista,
    solve_nmapg,
    solve_pg,
    solve_scp,
)

__version__ = "0.1.0"
