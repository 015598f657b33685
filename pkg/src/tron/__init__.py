"""Adaptive smoothing solvers for trajectory optimisation with max-structured costs."""
from .nonsmooth import (
    NonSmoothObjective,
    SimplexWeight,
    SmoothComponentPair,
    SmoothFunction,
    SmoothingSchedule,
    raw_value,
    smoothed_gradient,
    smoothed_hessian,
    smoothed_value,
    update_weights,
)
from .report import IterationRecord, SolverAbort, SolverReport

__version__ = "0.1.0"
