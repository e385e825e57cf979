"""Linear energy-stable solvers for viscoelastic polymer-solvent phase
separation: a conserved phase field coupled to bulk and shear viscoelastic
stresses and an incompressible flow on a periodic staggered grid."""

from .config import EocConfig, RunConfig, build_eoc_config, build_run_config, load_pairs, parse_pairs
from .energy import (EnergyBreakdown, breakdown_full, breakdown_simplified,
                     discrete_law_residual, total_energy_full,
                     total_energy_simplified)
from .full import (FixpointConfig, FixpointError, step_coupled,
                   step_coupled_cn, step_coupled_implicit_stress,
                   step_coupled_o2, step_splitting, step_splitting_implicit)
from .grid import Grid, TensorField, VectorField
from .initial_data import make_full_state, make_simplified_state
from .linalg import SolverConfig, SolverError
from .materials import FApprox, ModelParams, Potential
from .run import NanAbort, RunSummary, initial_state, run, run_eoc
from .simplified import step_o1, step_o2
from .state import FullState, SchemeKind, SimplifiedState, StepAux

__version__ = "0.1.0"

__all__ = [
    "EocConfig", "RunConfig", "build_eoc_config", "build_run_config",
    "load_pairs", "parse_pairs",
    "EnergyBreakdown", "breakdown_full", "breakdown_simplified",
    "discrete_law_residual", "total_energy_full", "total_energy_simplified",
    "FixpointConfig", "FixpointError", "step_coupled", "step_coupled_cn",
    "step_coupled_implicit_stress", "step_coupled_o2", "step_splitting",
    "step_splitting_implicit",
    "Grid", "TensorField", "VectorField",
    "make_full_state", "make_simplified_state",
    "SolverConfig", "SolverError",
    "FApprox", "ModelParams", "Potential",
    "NanAbort", "RunSummary", "initial_state", "run", "run_eoc",
    "step_o1", "step_o2",
    "FullState", "SchemeKind", "SimplifiedState", "StepAux",
    "__version__",
]
