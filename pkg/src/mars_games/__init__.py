"""Risk-sensitive self-play value iteration (MARS-VI) for tabular general-sum Markov games."""
from .equilibria import EquilibriumDist, GameMatrix, solve_ce, solve_cce, solve_ne, verify
from .game import JointPolicy, MGSpec, Trajectory, validate_spec
from .instances import bias_instance, lower_bound_mg, random_mg
from .learner import MARSVI, run
from .regret import certify_approx, episode_gaps, phi
from .risk_dp import best_modification, best_response, eval_policy

__all__ = [
    "MARSVI", "MGSpec", "JointPolicy", "Trajectory", "GameMatrix", "EquilibriumDist",
    "validate_spec", "eval_policy", "best_response", "best_modification",
    "solve_cce", "solve_ce", "solve_ne", "verify", "run", "phi", "episode_gaps",
    "certify_approx", "bias_instance", "lower_bound_mg", "random_mg",
]
__version__ = "0.1.0"
