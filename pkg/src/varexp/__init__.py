"""Sub-supersolution solvers for nonlocal p(x)-Laplacian Dirichlet problems."""

from .grid import Grid, ScalarField, distance_field, gradient, integrate, make_grid
from .modular import ExponentSet, H0Report, check_H0, holder_gap, luxemburg_norm, modular
from .plaplace import (
    ConvergenceError,
    DirichletProblem,
    EnergyReport,
    apply_plaplacian,
    compare_weak,
    energy,
    energy_gradient,
    solve_dirichlet,
    torsion,
)
from .subsuper import (
    NonlocalProblem,
    SolveReport,
    SolverOptions,
    SubSuperPair,
    fixed_point,
    nonlocal_rhs,
    solve_S,
    truncate,
    verify_pair,
)

__version__ = "0.1.0"
