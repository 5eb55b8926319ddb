"""Optimal convection cooling: finite element solver for the optimality system
of a bilinear control problem, where a divergence-free flow is chosen to
minimize temperature variance plus a penalty on the velocity gradient."""

from .analysis import compute_rates, rate_invariance_check, scale_solution
from .assembly import SourceTerm
from .forward import Discretization, OptState, initial_guess, solve_state
from .optimizer import AlgorithmConfig, RunResult, cost, run_algorithm
from .sources import EXAMPLES, example_source, source_from_expression

__all__ = [
    "AlgorithmConfig", "Discretization", "EXAMPLES", "OptState", "RunResult", "SourceTerm",
    "compute_rates", "cost", "example_source", "initial_guess", "rate_invariance_check",
    "run_algorithm", "scale_solution", "solve_state", "source_from_expression",
]
__version__ = "0.1.0"
