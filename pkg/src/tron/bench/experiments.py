"""Builds problems, starting points, solvers and oracles from an ExperimentConfig."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..admm import AdmmOptions, solve_admm_l1
from ..ilqr import IlqrOptions
from ..models.diffdrive import DiffDriveWorld, diffdrive_problem, signed_distances
from ..models.lasso import generate_lasso
from ..models.needle import NeedleParams, needle_problem
from ..models.satellite import SatelliteParams, satellite_oracle, satellite_problem
from ..nonsmooth import SmoothingSchedule
from ..oracles import lasso_oracle, riccati_lqr
from ..scalar import SolverOptions, newton_nonsmooth_baseline, solve_tron_generic, subgradient_baseline
from ..trajopt import TronTrajOptions, ilqr_nonsmooth_baseline, solve_tron_trajectory
from .config import ConfigError, ExperimentConfig

PARAMS = {"diffdrive": DiffDriveWorld, "needle": NeedleParams, "satellite": SatelliteParams}
LASSO_KEYS = ("N", "d", "rho", "noise")

#: control columns whose sparsity each experiment reports
SPARSITY_COLUMNS = {"needle": ("u_1",), "satellite": ("u_0", "u_1", "u_2")}


@dataclass
class SolverOutcome:
    solver: str
    report: object  # SolverReport
    states: Optional[np.ndarray] = None
    controls: Optional[np.ndarray] = None
    solution: Optional[np.ndarray] = None
    weight_counts: Optional[list] = None


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def model_params(config: ExperimentConfig):
    """The model's parameter dataclass (or lasso keyword dict) for ``config``."""
    if config.experiment == "lasso":
        unknown = set(config.model) - set(LASSO_KEYS)
        if unknown:
            raise ConfigError(f"unknown lasso model keys: {', '.join(sorted(unknown))}")
        return dict(config.model)
    cls = PARAMS[config.experiment]
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(config.model) - names
    if unknown:
        raise ConfigError(f"unknown {config.experiment} model keys: {', '.join(sorted(unknown))}")
    try:
        return cls(**{k: _tuplify(v) for k, v in config.model.items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {config.experiment} model: {e}") from None


def schedule(config: ExperimentConfig) -> SmoothingSchedule:
    if config.eta_decay is None:
        return SmoothingSchedule.constant(config.eta, config.iters)
    return SmoothingSchedule(eta0=config.eta, decay="geometric", rate=config.eta_decay, max_outer_iters=config.iters)


class Experiment:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.name = config.experiment
        self.params = model_params(config)
        if self.name == "lasso":
            self.instance, self.objective = generate_lasso(config.seed, **self.params)
            self.problem = None
        else:
            build = {"diffdrive": diffdrive_problem, "needle": needle_problem, "satellite": satellite_problem}
            self.problem = build[self.name](self.params)

    # starting points

    def x0(self) -> np.ndarray:
        p = self.params
        if self.name == "lasso":
            return np.zeros(self.objective.dimension)
        if self.name == "satellite":
            return np.asarray(p.x0, dtype=float)
        return np.asarray(p.start, dtype=float)

    def u_init(self) -> np.ndarray:
        p = self.params
        if self.name == "diffdrive":
            U = p.straight_line_controls()
        elif self.name == "needle":
            U = p.initial_controls()
        else:
            U = np.zeros((p.horizon, 3))
        if self.config.init_noise > 0:
            rng = np.random.default_rng(self.config.seed)
            U = U + self.config.init_noise * rng.standard_normal(U.shape)
        return U

    # solvers

    def run(self, solver: str) -> SolverOutcome:
        c = self.config
        if self.name == "lasso":
            opts = SolverOptions(schedule=schedule(c), inner_max_iters=c.inner_iters)
            y0 = self.x0()
            if solver == "tron":
                rep = solve_tron_generic(self.objective, y0, opts)
            elif solver == "newton":
                rep = newton_nonsmooth_baseline(self.objective, y0, opts)
            else:
                rep = subgradient_baseline(self.objective, y0, c.subgradient_lr0, opts)
            return SolverOutcome(solver, rep, solution=np.asarray(rep.solution, dtype=float))
        x0, U0 = self.x0(), self.u_init()
        opts = TronTrajOptions(schedule=schedule(c), ilqr=IlqrOptions(), inner_iters_per_outer=c.inner_iters)
        counts = None
        if solver == "tron":
            traj, rep, weights = solve_tron_trajectory(self.problem, x0, U0, opts)
            counts = list(weights.counts)
        elif solver == "ilqr":
            traj, rep = ilqr_nonsmooth_baseline(self.problem, x0, U0, opts)
        else:
            if self.problem.l1 is None:
                raise ConfigError(f"ADMM needs an L1 control penalty, which {self.name} does not have")
            aopts = AdmmOptions(rho=c.admm_rho, outer_iters=c.iters, inner_iters_per_outer=c.inner_iters)
            traj, rep = solve_admm_l1(self.problem, x0, U0, aopts)
        return SolverOutcome(solver, rep, states=traj.states, controls=traj.controls, weight_counts=counts)

    # reference values

    def oracle(self) -> dict:
        """Independent optimum values, where the problem is convex."""
        if self.name == "lasso":
            inst = self.instance
            return {"prox_gradient": lasso_oracle(inst.X, inst.y, inst.rho).value}
        if self.name == "satellite":
            p = self.params
            if p.alpha == 0:
                A, B = self.problem.dynamics.linearize(np.zeros(6), np.zeros(3))
                T = p.horizon
                sol = riccati_lqr(
                    [A] * T, [B] * T, [np.zeros((6, 6))] * T, [np.diag(p.R)] * T,
                    [np.zeros((3, 6))] * T, np.diag(p.Q), np.asarray(p.x0, dtype=float),
                )
                return {"riccati_lqr": sol.cost}
            return {"prox_gradient": satellite_oracle(p)[0]}
        return {}

    def min_clearance(self, states) -> float:
        """Smallest obstacle clearance along a diff-drive path."""
        return float(min(signed_distances(self.params, x).min() for x in states))
