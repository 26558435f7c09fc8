"""Portfolio selection with quasiconvex risk measures via duality and bisection."""
from .barrier import SolveOutcome, SolverConfig, check_kkt, solve
from .bisection import BisectionTrace, bisect, find_initial_bounds
from .dual import StructuredProgram, build_dual, build_feasibility_dual
from .oracle import OracleResult, check_feasible, solve_primal
from .penalty import alpha, alpha_generic_ce, alpha_minus, alpha_oracle, alpha_tilde, beta, gamma
from .risk import LossFunction, RiskMeasure, evaluate, monotone_rescale_check
from .scenarios import Portfolio, ScenarioSet, generate_synthetic, load_scenarios, portfolio_return

__version__ = "0.1.0"
