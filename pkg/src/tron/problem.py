"""Trajectory problems whose stage costs are smooth plus sums of pair maxima.

Stage t < T is a function of z = [x_t; u_t]; the terminal stage of x_T only.
Controls are u_0..u_{T-1}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, List, Optional, Sequence

import numpy as np

from .dynamics import DynamicsModel
from .ilqr import StageCostSet, Trajectory
from .nonsmooth import (
    WEIGHT_FLOOR,
    _pair_values,
    NonSmoothObjective,
    PairBatch,
    SimplexWeight,
    SmoothComponentPair,
    SmoothFunction,
    multiplicative_update,
    raw_value,
    selection_derivatives,
    smoothed_derivatives,
    smoothed_value,
)


@dataclass(frozen=True)
class L1Penalty:
    """alpha * ||S u_t||_1 on every non-terminal stage."""

    selection: np.ndarray  # (p, m)
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "selection", np.atleast_2d(np.asarray(self.selection, dtype=float)))
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")


@dataclass
class NonSmoothTrajectoryProblem:
    dynamics: DynamicsModel
    horizon: int
    stage_costs: List[SmoothFunction]
    stage_pairs: List[List[SmoothComponentPair]]
    terminal_cost: SmoothFunction
    terminal_pairs: List[SmoothComponentPair] = field(default_factory=list)
    l1: Optional[L1Penalty] = None
    name: str = ""
    # optional batched evaluators of each stage's pairs (entries may be None)
    stage_batches: Optional[List[Optional[PairBatch]]] = None
    terminal_batch: Optional[PairBatch] = None

    def __post_init__(self):
        T = self.horizon
        if T < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.stage_costs) != T or len(self.stage_pairs) != T:
            raise ValueError(f"need {T} stage costs and pair lists, got {len(self.stage_costs)} and {len(self.stage_pairs)}")
        self.stage_pairs = [list(p) for p in self.stage_pairs]
        if self.stage_batches is not None and len(self.stage_batches) != T:
            raise ValueError(f"need {T} stage batches, got {len(self.stage_batches)}")
        self.terminal_pairs = list(self.terminal_pairs)

    @classmethod
    def uniform(cls, dynamics, horizon, stage_cost, pairs, terminal_cost, terminal_pairs=(), batch=None, **kw):
        """Same stage cost and pairs at every t < T."""
        return cls(dynamics, horizon, [stage_cost] * horizon, [list(pairs)] * horizon,
                   terminal_cost, list(terminal_pairs), stage_batches=[batch] * horizon, **kw)

    @property
    def state_dim(self) -> int:
        return self.dynamics.state_dim

    @property
    def control_dim(self) -> int:
        return self.dynamics.control_dim

    @cached_property
    def _objectives(self) -> List[NonSmoothObjective]:
        n, m = self.state_dim, self.control_dim
        batches = self.stage_batches or [None] * self.horizon
        objs = [
            NonSmoothObjective(f, p, n + m, batch=b)
            for f, p, b in zip(self.stage_costs, self.stage_pairs, batches)
        ]
        objs.append(NonSmoothObjective(self.terminal_cost, self.terminal_pairs, n, batch=self.terminal_batch))
        return objs

    def stage_objective(self, t: int) -> NonSmoothObjective:
        """Objective of stage t over [x; u] (t < T) or over x (t == T)."""
        return self._objectives[t]

    @property
    def pair_counts(self) -> List[int]:
        return [len(p) for p in self.stage_pairs] + [len(self.terminal_pairs)]

    @property
    def max_pairs(self) -> int:
        return max(self.pair_counts)

    def stage_point(self, traj: Trajectory, t: int) -> np.ndarray:
        if t == self.horizon:
            return traj.states[t]
        return np.concatenate([traj.states[t], traj.controls[t]])

    def check(self, traj: Trajectory) -> None:
        T, n, m = self.horizon, self.state_dim, self.control_dim
        if traj.states.shape != (T + 1, n) or traj.controls.shape != (T, m):
            raise ValueError(
                f"trajectory shapes {traj.states.shape}/{traj.controls.shape} do not match "
                f"problem ({T + 1}, {n})/({T}, {m})"
            )


@dataclass
class WeightField:
    """Simplex weights per (timestep, pair); ``theta`` has shape (T+1, M, 2).

    Stages with fewer than M pairs leave their trailing entries unused.
    """

    theta: np.ndarray
    counts: List[int]

    @classmethod
    def initial(cls, problem: NonSmoothTrajectoryProblem, value: float = 0.5) -> "WeightField":
        th = np.empty((problem.horizon + 1, problem.max_pairs, 2))
        th[..., 0] = value
        th[..., 1] = 1.0 - value
        return cls(th, problem.pair_counts)

    def stage(self, t: int) -> np.ndarray:
        return self.theta[t, : self.counts[t]]

    def at(self, t: int, i: int) -> SimplexWeight:
        if i >= self.counts[t]:
            raise IndexError(f"stage {t} has only {self.counts[t]} pairs")
        return SimplexWeight(float(self.theta[t, i, 0]), float(self.theta[t, i, 1]))

    def rows(self) -> Iterator[tuple]:
        for t, c in enumerate(self.counts):
            for i in range(c):
                yield t, i, float(self.theta[t, i, 0]), float(self.theta[t, i, 1])

    def copy(self) -> "WeightField":
        return WeightField(self.theta.copy(), list(self.counts))

    def on_simplex(self, tol: float = 1e-12) -> bool:
        ok = True
        for t, c in enumerate(self.counts):
            w = self.theta[t, :c]
            ok &= bool(np.all(w >= 0) and np.all(np.abs(w.sum(axis=-1) - 1.0) <= tol))
        return ok


def _check_weights(problem: NonSmoothTrajectoryProblem, weights: WeightField) -> None:
    if weights.theta.shape[0] != problem.horizon + 1 or list(weights.counts) != problem.pair_counts:
        raise ValueError(
            f"weight field shaped {weights.theta.shape[:2]} with counts {weights.counts} "
            f"does not match problem counts {problem.pair_counts}"
        )


class SmoothedStageCosts(StageCostSet):
    """Smoothed stage costs of a trajectory problem at fixed weights and eta."""

    def __init__(self, problem: NonSmoothTrajectoryProblem, weights: WeightField, eta: float):
        if not eta > 0:
            raise ValueError("eta must be positive")
        _check_weights(problem, weights)
        self.problem = problem
        self.weights = weights
        self.eta = float(eta)
        self.horizon = problem.horizon
        self.state_dim = problem.state_dim
        self.control_dim = problem.control_dim

    def stage(self, t, x, u):
        z = np.concatenate([x, u])
        return smoothed_value(self.problem.stage_objective(t), z, self.weights.stage(t), self.eta)

    def stage_derivatives(self, t, x, u):
        z = np.concatenate([x, u])
        v, g, H = smoothed_derivatives(self.problem.stage_objective(t), z, self.weights.stage(t), self.eta)
        n = self.state_dim
        return v, g[:n], g[n:], H[:n, :n], H[n:, n:], H[n:, :n]

    def terminal(self, x):
        T = self.horizon
        return smoothed_value(self.problem.stage_objective(T), x, self.weights.stage(T), self.eta)

    def terminal_derivatives(self, x):
        T = self.horizon
        return smoothed_derivatives(self.problem.stage_objective(T), x, self.weights.stage(T), self.eta)


class RawStageCosts(StageCostSet):
    """Exact non-smooth stage costs with max-selection derivatives (ties to g)."""

    def __init__(self, problem: NonSmoothTrajectoryProblem):
        self.problem = problem
        self.horizon = problem.horizon
        self.state_dim = problem.state_dim
        self.control_dim = problem.control_dim

    def stage(self, t, x, u):
        return raw_value(self.problem.stage_objective(t), np.concatenate([x, u]))

    def stage_derivatives(self, t, x, u):
        v, g, H = selection_derivatives(self.problem.stage_objective(t), np.concatenate([x, u]))
        n = self.state_dim
        return v, g[:n], g[n:], H[:n, :n], H[n:, n:], H[n:, :n]

    def terminal(self, x):
        return raw_value(self.problem.stage_objective(self.horizon), x)

    def terminal_derivatives(self, x):
        return selection_derivatives(self.problem.stage_objective(self.horizon), x)


def smoothed_stage_costs(problem: NonSmoothTrajectoryProblem, weights: WeightField, eta: float) -> SmoothedStageCosts:
    return SmoothedStageCosts(problem, weights, eta)


def raw_trajectory_cost(problem: NonSmoothTrajectoryProblem, traj: Trajectory) -> float:
    problem.check(traj)
    return RawStageCosts(problem).total(traj.states, traj.controls)


def update_weight_field(
    problem: NonSmoothTrajectoryProblem,
    weights: WeightField,
    traj: Trajectory,
    eta: float,
    floor: float = WEIGHT_FLOOR,
) -> WeightField:
    """Multiplicative update of every (t, i) weight at the given trajectory."""
    _check_weights(problem, weights)
    out = weights.copy()
    for t, c in enumerate(weights.counts):
        if not c:
            continue
        z = problem.stage_point(traj, t)
        g, gb = _pair_values(problem.stage_objective(t), z)
        out.theta[t, :c] = multiplicative_update(weights.theta[t, :c], g, gb, eta, floor=floor)
    return out
