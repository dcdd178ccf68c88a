"""Trapped modes in finite branched waveguides."""
from .geometry import build_domain, generate_mesh
from .eigensolver import solve_domain, find_a_min
from .condition import coefficients, check, threshold_eta, a_threshold, trial_catalog
from .reduced import ReducedProblem, fixed_point

__version__ = "0.1.0"

__all__ = ["build_domain", "generate_mesh", "solve_domain", "find_a_min", "coefficients",
           "check", "threshold_eta", "a_threshold", "trial_catalog", "ReducedProblem",
           "fixed_point"]
