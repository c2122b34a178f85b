"""Comparing finite statistical experiments.

Decides the linear-Blackwell, Blackwell and monotone-posterior-expectation
orders between row-stochastic likelihood matrices, and computes the decision,
moral-hazard and screening quantities that these orders rank.
"""

from . import decision, experiment, lborder, moral_hazard, numerics, screening
from .decision import DecisionProblem, Strategy, ex_ante_value, is_qcc
from .errors import LBError
from .experiment import (
    FiniteExperiment,
    Garbling,
    GridExperiment,
    Prior,
    StateSpace,
    WeightedDichotomy,
    apply_garbling,
    noisy_revealing_pair,
)
from .lborder import (
    OrderVerdict,
    blackwell_check,
    lb_equivalent,
    lb_exact,
    lb_sampled,
    mpe_check,
    support_diff,
)
from .numerics import LinearProgram, PiecewiseLinearConvex, solve_lp

__version__ = "0.1.0"

__all__ = [
    "decision",
    "experiment",
    "lborder",
    "moral_hazard",
    "numerics",
    "screening",
    "DecisionProblem",
    "Strategy",
    "ex_ante_value",
    "is_qcc",
    "LBError",
    "FiniteExperiment",
    "Garbling",
    "GridExperiment",
    "Prior",
    "StateSpace",
    "WeightedDichotomy",
    "apply_garbling",
    "noisy_revealing_pair",
    "OrderVerdict",
    "blackwell_check",
    "lb_equivalent",
    "lb_exact",
    "lb_sampled",
    "mpe_check",
    "support_diff",
    "LinearProgram",
    "PiecewiseLinearConvex",
    "solve_lp",
]
