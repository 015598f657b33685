"""Adaptive smoothing for trajectory optimisation, with an iLQR inner solver.

Each outer iteration k builds the smoothed stage costs at the current
weights and eta^k, improves the control sequence with a warm-started iLQR
solve, and then updates every (timestep, pair) weight at the new
trajectory.  The reported cost is always the exact non-smooth cost.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import rollout
from .ilqr import FunctionStageCosts, IlqrOptions, StageCostSet, Trajectory, ilqr_solve
from .nonsmooth import WEIGHT_FLOOR, SmoothingSchedule
from .problem import (
    NonSmoothTrajectoryProblem,
    RawStageCosts,
    WeightField,
    raw_trajectory_cost,
    smoothed_stage_costs,
    update_weight_field,
)
from .report import IterationRecord, SolverAbort, SolverReport, Stopwatch


@dataclass(frozen=True)
class TronTrajOptions:
    schedule: SmoothingSchedule = field(default_factory=lambda: SmoothingSchedule.constant(1.0, 100))
    ilqr: IlqrOptions = field(default_factory=IlqrOptions)
    inner_iters_per_outer: int = 5
    # when set, keep running inner chunks until the surrogate gradient is this small
    surrogate_grad_tol: Optional[float] = None
    weight_floor: float = WEIGHT_FLOOR
    max_consecutive_failures: Optional[int] = None

    def __post_init__(self):
        if self.inner_iters_per_outer < 1:
            raise ValueError("inner_iters_per_outer must be >= 1")

    @property
    def outer_iters(self) -> int:
        return self.schedule.max_outer_iters


def _inner_solve(problem, costs: StageCostSet, x0, U, opts: TronTrajOptions):
    """Warm-started iLQR on ``costs``; returns (traj, info, failed)."""
    inner = dataclasses.replace(opts.ilqr, max_iters=opts.inner_iters_per_outer)
    traj, rep = ilqr_solve(problem.dynamics, costs, x0, U, inner)
    info = rep.extras["info"]
    if opts.surrogate_grad_tol is not None:
        spent = info.iterations
        while (
            not info.failed
            and not info.converged
            and spent < opts.ilqr.max_iters
            and np.linalg.norm(info.gradient) > opts.surrogate_grad_tol
        ):
            traj, rep = ilqr_solve(problem.dynamics, costs, x0, traj.controls, inner)
            info = rep.extras["info"]
            spent += max(info.iterations, 1)
    return traj, info


def _outer_loop(problem, x0, u_init, opts: TronTrajOptions, name: str, make_costs, after_step):
    U = np.array(u_init, dtype=float).reshape(problem.horizon, problem.control_dim)
    traj = Trajectory(rollout(problem.dynamics, x0, U), U)
    report = SolverReport(name)
    clock = Stopwatch()
    limit = opts.max_consecutive_failures or opts.outer_iters
    failures = 0
    info = None
    for k in range(1, opts.outer_iters + 1):
        eta = opts.schedule.eta(k)
        costs = make_costs(eta)
        new_traj, info = _inner_solve(problem, costs, x0, traj.controls, opts)
        if info.failed:
            failures += 1
            report.events.append(f"outer iteration {k}: inner iLQR failed, trajectory kept")
            if failures >= limit:
                raise SolverAbort(f"{failures} consecutive inner iLQR failures (last at k={k})")
        else:
            failures = 0
            traj = new_traj
        snapshot = after_step(traj, eta)
        gnorm = float(np.linalg.norm(info.gradient)) if info.gradient is not None else float("nan")
        cost = raw_trajectory_cost(problem, traj)
        if not np.isfinite(cost):
            raise SolverAbort(f"non-finite trajectory cost at outer iteration k={k}")
        report.log(IterationRecord(k, clock(), cost, gnorm, eta, snapshot))
    report.solution = traj
    report.converged = bool(info is not None and info.converged)
    return traj, report


def solve_tron_trajectory(
    problem: NonSmoothTrajectoryProblem, x0, u_init, opts: TronTrajOptions = TronTrajOptions()
):
    """Returns ``(trajectory, report, weights)``."""
    state = {"w": WeightField.initial(problem)}

    def make_costs(eta):
        return smoothed_stage_costs(problem, state["w"], eta)

    def after_step(traj, eta):
        state["w"] = update_weight_field(problem, state["w"], traj, eta, floor=opts.weight_floor)
        return state["w"].theta.copy()

    traj, report = _outer_loop(problem, x0, u_init, opts, "tron", make_costs, after_step)
    report.extras["weight_counts"] = list(state["w"].counts)
    return traj, report, state["w"]


def ilqr_nonsmooth_baseline(
    problem: NonSmoothTrajectoryProblem, x0, u_init, opts: TronTrajOptions = TronTrajOptions()
):
    """iLQR on the raw costs with max-selection derivatives, same outer budget as TRON."""
    raw = RawStageCosts(problem)
    traj, report = _outer_loop(problem, x0, u_init, opts, "ilqr", lambda eta: raw, lambda traj, eta: None)
    for r in report.records:
        r.eta = float("nan")
    return traj, report


def smooth_part_costs(problem: NonSmoothTrajectoryProblem) -> FunctionStageCosts:
    """The pair-free part f_t, f_T as a plain cost set."""
    return FunctionStageCosts(problem.stage_costs, problem.terminal_cost, problem.state_dim, problem.control_dim)
