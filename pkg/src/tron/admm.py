"""Scaled-form ADMM for trajectory problems with an L1 penalty on selected controls.

The problem is split as

    min  sum_t f_t(x_t, u_t) + f_T(x_T) + alpha * sum_t ||z_t||_1   s.t.  S u_t = z_t

and iterated with a fixed penalty rho:

    u   <- iLQR on f + (rho/2) sum_t ||S u_t - z_t + lam_t||^2
    z   <- soft_threshold(S u + lam, alpha / rho)
    lam <- lam + S u - z
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .dynamics import rollout
from .ilqr import IlqrOptions, StageCostSet, Trajectory, ilqr_solve
from .oracles import soft_threshold
from .problem import NonSmoothTrajectoryProblem, raw_trajectory_cost
from .report import IterationRecord, SolverAbort, SolverReport, Stopwatch
from .trajopt import smooth_part_costs

#: residual magnitude treated as divergence
DIVERGENCE_LIMIT = 1e8


@dataclass(frozen=True)
class AdmmOptions:
    rho: float = 1.0
    outer_iters: int = 300
    ilqr: IlqrOptions = field(default_factory=IlqrOptions)
    inner_iters_per_outer: int = 5

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("ADMM penalty rho must be positive")
        if self.outer_iters < 1 or self.inner_iters_per_outer < 1:
            raise ValueError("iteration counts must be >= 1")


class AugmentedCosts(StageCostSet):
    """base costs plus (rho/2) ||S u_t - v_t||^2 on every stage."""

    def __init__(self, base: StageCostSet, S: np.ndarray, targets: np.ndarray, rho: float):
        self.base = base
        self.S = S
        self.StS = S.T @ S
        self.targets = targets
        self.rho = float(rho)
        self.horizon = base.horizon
        self.state_dim = base.state_dim
        self.control_dim = base.control_dim

    def stage(self, t, x, u):
        r = self.S @ u - self.targets[t]
        return self.base.stage(t, x, u) + 0.5 * self.rho * float(r @ r)

    def stage_derivatives(self, t, x, u):
        l, lx, lu, lxx, luu, lux = self.base.stage_derivatives(t, x, u)
        r = self.S @ u - self.targets[t]
        return (
            l + 0.5 * self.rho * float(r @ r),
            lx,
            lu + self.rho * (self.S.T @ r),
            lxx,
            luu + self.rho * self.StS,
            lux,
        )

    def terminal(self, x):
        return self.base.terminal(x)

    def terminal_derivatives(self, x):
        return self.base.terminal_derivatives(x)


def solve_admm_l1(problem: NonSmoothTrajectoryProblem, x0, u_init, opts: AdmmOptions = AdmmOptions()):
    """Returns ``(trajectory, report)``.

    ``report.extras`` carries ``primal_residuals``, ``dual_residuals`` and the
    final ``z`` and ``lam`` arrays.
    """
    if problem.l1 is None:
        raise ValueError(f"problem {problem.name!r} has no L1 penalty on its controls")
    S = problem.l1.selection
    alpha = problem.l1.alpha
    if S.shape[1] != problem.control_dim:
        raise ValueError(f"selection has {S.shape[1]} columns, controls have {problem.control_dim}")
    rho = opts.rho
    base = smooth_part_costs(problem)
    inner = dataclasses.replace(opts.ilqr, max_iters=opts.inner_iters_per_outer)

    U = np.array(u_init, dtype=float).reshape(problem.horizon, problem.control_dim)
    traj = Trajectory(rollout(problem.dynamics, x0, U), U)
    Z = traj.controls @ S.T
    lam = np.zeros_like(Z)
    report = SolverReport("admm")
    primal, dual = [], []
    clock = Stopwatch()
    for k in range(1, opts.outer_iters + 1):
        costs = AugmentedCosts(base, S, Z - lam, rho)
        new_traj, rep = ilqr_solve(problem.dynamics, costs, x0, traj.controls, inner)
        info = rep.extras["info"]
        if info.failed:
            report.events.append(f"iteration {k}: x-step iLQR failed, controls kept")
        else:
            traj = new_traj
        SU = traj.controls @ S.T
        Z_prev = Z
        Z = soft_threshold(SU + lam, alpha / rho)
        lam = lam + SU - Z
        r = float(np.linalg.norm(SU - Z))
        s = float(rho * np.linalg.norm((Z - Z_prev) @ S))
        primal.append(r)
        dual.append(s)
        if not (np.isfinite(r) and np.isfinite(s)) or max(r, s) > DIVERGENCE_LIMIT:
            raise SolverAbort(f"ADMM residuals diverged at iteration {k}: primal {r:.3g}, dual {s:.3g}")
        cost = raw_trajectory_cost(problem, traj)
        gnorm = float(np.linalg.norm(info.gradient)) if info.gradient is not None else float("nan")
        report.log(IterationRecord(k, clock(), cost, gnorm))
    report.solution = traj
    report.converged = bool(primal[-1] < 1e-8 and dual[-1] < 1e-8)
    report.extras.update(primal_residuals=primal, dual_residuals=dual, z=Z, lam=lam)
    return traj, report
