"""
Lokaler NLP-Solver (Augmented Lagrangian + projiziertes BFGS)
"""

from .nlp import IterationRecord, NlpProblem, SolverConfig, SolverResult, SolverStatus
from .gradients import finite_diff_gradient, finite_diff_jacobian
from .auglag import AugmentedLagrangianSolver, solve

__all__ = [
    'IterationRecord', 'NlpProblem', 'SolverConfig', 'SolverResult', 'SolverStatus',
    'finite_diff_gradient', 'finite_diff_jacobian', 'AugmentedLagrangianSolver', 'solve'
]
