"""Physically constrained polynomial chaos expansions.

Surrogates are fitted by least squares subject to boundary conditions and
differential equations enforced at collocation points.
"""
from .bench import builtin_case, run_convergence, run_heat_uq
from .config import load_config, load_model, parse_config, save_model
from .design import sample_lhs, sample_mc, virtual_point_count
from .expression import Expression
from .model import Pc2Model
from .operators import BoundaryCondition, LinearOperator, ProblemSpec
from .polybasis import BasisSet, VariableTransform, multi_index_set
from .solver import (
    DivergenceError,
    FitError,
    SingularKKTError,
    TrainingData,
    fit,
    fit_kkt,
    fit_lar,
    fit_lar_kkt,
    fit_nonlinear,
    solve_kkt,
)
from .uq import error_breakdown, global_mean, global_variance, local_stats, reduce_at, sobol_first_order

__version__ = "0.1.0"
