"""Unconstrained solvers for max-of-smooth objectives.

``solve_tron_generic`` alternates a Newton solve of the smoothed surrogate
with the closed-form weight update.  The two baselines it is compared
against, Newton applied directly to the non-smooth objective and the
subgradient method, live here as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .nonsmooth import (
    WEIGHT_FLOOR,
    _pair_values,
    NonSmoothObjective,
    SmoothingSchedule,
    multiplicative_update,
    pair_lambdas,
    raw_value,
    selection_derivatives,
    smoothed_gradient,
    smoothed_hessian,
    smoothed_value,
    subgradient,
)
from .report import IterationRecord, SolverAbort, SolverReport, Stopwatch


@dataclass(frozen=True)
class LineSearch:
    shrink: float = 0.5
    c: float = 1e-4
    max_backtracks: int = 50

    def __post_init__(self):
        if not 0 < self.shrink < 1 or not 0 < self.c < 1 or self.max_backtracks < 1:
            raise ValueError("line search needs shrink, c in (0, 1) and max_backtracks >= 1")


@dataclass(frozen=True)
class SolverOptions:
    schedule: SmoothingSchedule = field(default_factory=SmoothingSchedule)
    inner_max_iters: int = 50
    line_search: LineSearch = field(default_factory=LineSearch)
    grad_tol: float = 1e-8
    weight_floor: float = WEIGHT_FLOOR

    def __post_init__(self):
        if self.inner_max_iters < 1 or not self.grad_tol > 0:
            raise ValueError("inner_max_iters must be >= 1 and grad_tol positive")


class NewtonResult(NamedTuple):
    y: np.ndarray
    iterations: int
    converged: bool
    stalled: bool
    grad_norm: float


def _shifted_solve(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve (H + mu I) d = -g with the smallest mu from a x10 ladder that factorises."""
    n = H.shape[0]
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    mu = 0.0
    while True:
        try:
            c = cho_factor(H + mu * np.eye(n), lower=True, check_finite=True)
            return cho_solve(c, -g)
        except (LinAlgError, ValueError):
            mu = 1e-8 * scale if mu == 0.0 else mu * 10.0
            if mu > 1e12 * scale:
                raise LinAlgError("Newton system not solvable after maximal shift")


def newton_inner(
    value: Callable,
    grad: Callable,
    hess: Callable,
    y0,
    tol: float,
    max_iters: int = 50,
    line_search: LineSearch = LineSearch(),
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> NewtonResult:
    """Damped Newton with a Levenberg shift and Armijo backtracking."""
    y = np.array(y0, dtype=float)
    fy = value(y)
    gy = grad(y)
    gn = float(np.linalg.norm(gy))
    for it in range(max_iters):
        if gn <= tol:
            return NewtonResult(y, it, True, False, gn)
        d = _shifted_solve(hess(y), gy)
        slope = float(gy @ d)
        alpha = 1.0
        for _ in range(line_search.max_backtracks):
            y_new = y + alpha * d
            f_new = value(y_new)
            if np.isfinite(f_new) and f_new <= fy + line_search.c * alpha * slope:
                break
            alpha *= line_search.shrink
        else:
            return NewtonResult(y, it, False, True, gn)
        y, fy = y_new, f_new
        gy = grad(y)
        gn = float(np.linalg.norm(gy))
        if callback is not None:
            callback(it + 1, y)
    return NewtonResult(y, max_iters, gn <= tol, False, gn)


def solve_tron_generic(obj: NonSmoothObjective, y0, opts: SolverOptions = SolverOptions()) -> SolverReport:
    y = obj.check_point(y0).copy()
    sched = opts.schedule
    theta = np.full((obj.num_pairs, 2), 0.5)
    report = SolverReport("tron")
    clock = Stopwatch()
    capped = []
    result = None
    for k in range(1, sched.max_outer_iters + 1):
        eta, eps = sched.eta(k), sched.eps(k)
        th = theta.copy()
        try:
            result = newton_inner(
                lambda z: smoothed_value(obj, z, th, eta),
                lambda z: smoothed_gradient(obj, z, th, eta),
                lambda z: smoothed_hessian(obj, z, th, eta),
                y,
                eps,
                opts.inner_max_iters,
                opts.line_search,
            )
        except LinAlgError as e:
            raise SolverAbort(f"inner solve failed at outer iteration k={k}, y={y}: {e}") from None
        if not np.all(np.isfinite(result.y)):
            raise SolverAbort(f"non-finite iterate at outer iteration k={k}, y={result.y}")
        y = result.y
        capped.append(not result.converged)
        report.extras["lambdas"] = pair_lambdas(obj, y, th, eta)
        if obj.num_pairs:
            g, gb = _pair_values(obj, y)
            theta = multiplicative_update(theta, g, gb, eta, floor=opts.weight_floor)
        report.log(IterationRecord(k, clock(), raw_value(obj, y), result.grad_norm, eta, theta.copy()))
    report.solution = y
    report.converged = bool(result is not None and result.converged)
    report.extras["inner_capped"] = capped
    return report


def newton_nonsmooth_baseline(obj: NonSmoothObjective, y0, opts: SolverOptions = SolverOptions()) -> SolverReport:
    """Newton on the raw objective with max-selection derivatives.

    One record per Newton iteration, budget ``schedule.max_outer_iters``.
    Near a kink the Armijo search keeps failing and the method stalls.
    """
    y0 = obj.check_point(y0)
    report = SolverReport("newton")
    clock = Stopwatch()

    def log(it, y):
        _, s, _ = selection_derivatives(obj, y)
        report.log(IterationRecord(it, clock(), raw_value(obj, y), float(np.linalg.norm(s))))

    res = newton_inner(
        lambda z: raw_value(obj, z),
        lambda z: selection_derivatives(obj, z)[1],
        lambda z: selection_derivatives(obj, z)[2],
        y0,
        opts.grad_tol,
        opts.schedule.max_outer_iters,
        opts.line_search,
        callback=log,
    )
    if res.stalled:
        report.events.append(f"line search exhausted after {res.iterations} iterations")
    if not report.records:
        log(0, res.y)
    report.solution = res.y
    report.converged = res.converged
    return report


def subgradient_baseline(
    obj: NonSmoothObjective, y0, lr0: float = 1.0, opts: SolverOptions = SolverOptions()
) -> SolverReport:
    """y <- y - lr0/sqrt(k) * s with s a max-selection subgradient."""
    if not lr0 > 0:
        raise ValueError("lr0 must be positive")
    y = obj.check_point(y0).copy()
    report = SolverReport("subgradient")
    clock = Stopwatch()
    best_val, best_y = raw_value(obj, y), y.copy()
    for k in range(1, opts.schedule.max_outer_iters + 1):
        s = subgradient(obj, y)
        y = y - (lr0 / math.sqrt(k)) * s
        if not np.all(np.isfinite(y)):
            raise SolverAbort(f"non-finite iterate at iteration k={k}")
        val = raw_value(obj, y)
        if val < best_val:
            best_val, best_y = val, y.copy()
        report.log(IterationRecord(k, clock(), val, float(np.linalg.norm(s))))
    report.solution = y
    report.extras["best_cost"] = best_val
    report.extras["best_solution"] = best_y
    return report
