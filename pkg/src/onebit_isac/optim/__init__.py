"""Surrogates and exact solvers used by the MM design loop."""

from .bnb import BnbResult, BnbStatus, enumerate_ilp, solve_bnb
from .continuous import BallResult, feasible_point_on_sphere, maximize_over_ball, min_norm_point
from .ilp import IlpInstance, realify, to_complex, to_real
from .lp import DualSimplex, LpResult, LpStatus, lp_relaxation
from .surrogate import SurrogateState, linear_surrogate, majorize_to_linear, minorize_inverse_quadratic

__all__ = [
    "BallResult",
    "BnbResult",
    "BnbStatus",
    "DualSimplex",
    "IlpInstance",
    "LpResult",
    "LpStatus",
    "SurrogateState",
    "enumerate_ilp",
    "feasible_point_on_sphere",
    "linear_surrogate",
    "lp_relaxation",
    "majorize_to_linear",
    "maximize_over_ball",
    "min_norm_point",
    "minorize_inverse_quadratic",
    "realify",
    "solve_bnb",
    "to_complex",
    "to_real",
]
