"""Feedback optimization cast as output regulation.

Controllers are synthesized so that a plant's input tracks the time-varying
minimizer of a loss defined through the plant's steady state, despite
disturbances produced by a known exosystem.
"""

from .errors import (
    Diverged,
    DomainError,
    FeedoptError,
    FitFailure,
    InvalidInput,
    NoSolution,
    NumericalFailure,
    PreconditionError,
    SynthesisError,
    UnsupportedProblem,
)
from .linalg import LinearizationData, check_necessary_conditions, place_observer_gain, place_state_feedback
from .manifold import ManifoldSolution, PolyMap, fit_manifold, invariance_residual, poly_basis
from .problems import Problem, builtin, reduced_gradient
from .regulator import assemble_linear_controller, closed_loop_matrix, solve_static_linear
from .simulate import ClosedLoop, integrate, metrics
from .synthesis import baseline_gradient_flow, synthesize_dynamic, synthesize_static

__version__ = "0.1.0"
