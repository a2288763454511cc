"""Certifiably optimal anonymous bearing-only mutual localization."""

from .baselines import LocalSolveResult, am_solve, am_solve_anonymous, lm_solve, random_init
from .formulation import (
    CostMatrices,
    ProblemInstance,
    State,
    build_cost,
    make_edges,
    marginalize,
    problem_cost,
)
from .lifting import LiftedLayout, build_constraints, lift_ground_truth
from .recovery import Certificate, RecoveredSolution, solve_mutual_localization
from .sdp import SolverSettings, relax, solve
from .simulation import SceneConfig, simulate

__version__ = "0.1.0"

__all__ = [
    "Certificate", "CostMatrices", "LiftedLayout", "LocalSolveResult", "ProblemInstance",
    "RecoveredSolution", "SceneConfig", "SolverSettings", "State", "am_solve",
    "am_solve_anonymous", "build_constraints", "build_cost", "lift_ground_truth", "lm_solve",
    "make_edges", "marginalize", "problem_cost", "random_init", "relax", "simulate", "solve",
    "solve_mutual_localization",
]
