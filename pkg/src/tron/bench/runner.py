"""Runs the solvers of one experiment and writes their artifacts.

Files written into the output directory:

* ``convergence_<solver>.csv``  solver,iter,wall_s,cost,grad_norm,eta
* ``trajectory_<solver>.csv``   t,x_0..,u_0..  (terminal row leaves controls empty)
* ``solution_<solver>.csv``     index,value  (lasso only)
* ``weights_<solver>.csv``      iter,t,pair,theta1,theta2  (TRON only)
* ``oracle.csv``                name,value  (convex experiments only)
* ``summary.csv``               solver,iters,final_cost,best_cost,converged
* ``manifest.json``             config echo, versions, timings, events

Numbers are written with ``repr`` so files round-trip exactly.  Apart from
``wall_s`` every CSV is a pure function of the config; ``deterministic=True``
writes ``wall_s`` as 0 so the whole file is.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import __version__
from ..report import SolverAbort
from .config import ExperimentConfig
from .experiments import Experiment, SolverOutcome

log = logging.getLogger(__name__)

CONVERGENCE_HEADER = ["solver", "iter", "wall_s", "cost", "grad_norm", "eta"]
WEIGHTS_HEADER = ["iter", "t", "pair", "theta1", "theta2"]


@dataclass
class RunArtifacts:
    out_dir: str
    convergence: dict = field(default_factory=dict)
    trajectories: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    oracle: Optional[str] = None
    summary: Optional[str] = None
    manifest: Optional[str] = None
    plots: list = field(default_factory=list)
    aborted: dict = field(default_factory=dict)
    outcomes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.aborted


def fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if np.isnan(v):
        return "nan"
    return repr(v)


def _run_one(config_dict: dict, solver: str):
    """Worker entry point: rebuilds the experiment so nothing mutable is shared."""
    exp = Experiment(ExperimentConfig(**{**config_dict, "solvers": tuple(config_dict["solvers"])}))
    t0 = time.perf_counter()
    try:
        out = exp.run(solver)
    except SolverAbort as e:
        return solver, None, str(e), time.perf_counter() - t0
    return solver, out, None, time.perf_counter() - t0


def _write_csv(path, header, rows) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_convergence(path, outcome: SolverOutcome, deterministic: bool) -> str:
    rows = []
    for r in outcome.report.records:
        wall = 0.0 if deterministic else r.wall_s
        rows.append([outcome.solver, r.iteration, fmt(wall), fmt(r.cost), fmt(r.grad_norm), fmt(r.eta)])
    return _write_csv(path, CONVERGENCE_HEADER, rows)


def write_trajectory(path, states, controls) -> str:
    n, m = states.shape[1], controls.shape[1]
    header = ["t"] + [f"x_{i}" for i in range(n)] + [f"u_{j}" for j in range(m)]
    rows = []
    for t in range(states.shape[0]):
        u = controls[t] if t < controls.shape[0] else [None] * m
        rows.append([t] + [fmt(v) for v in states[t]] + [fmt(v) for v in u])
    return _write_csv(path, header, rows)


def write_solution(path, y) -> str:
    return _write_csv(path, ["index", "value"], [[i, fmt(v)] for i, v in enumerate(y)])


def write_weights(path, outcome: SolverOutcome) -> str:
    rows = []
    for r in outcome.report.records:
        if r.weights is None:
            continue
        W = np.asarray(r.weights)
        if W.ndim == 2:  # single objective: one stage
            W, counts = W[None], [W.shape[0]]
        else:
            counts = outcome.weight_counts
        for t, c in enumerate(counts):
            for i in range(c):
                rows.append([r.iteration, t, i, fmt(W[t, i, 0]), fmt(W[t, i, 1])])
    return _write_csv(path, WEIGHTS_HEADER, rows)


def _versions() -> dict:
    import matplotlib
    import scipy

    return {
        "tron": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def run_experiment(
    config: ExperimentConfig,
    out_dir: str,
    deterministic: bool = False,
    jobs: int = 1,
    plots: bool = True,
) -> RunArtifacts:
    """Run every solver in ``config.solvers`` from the same start and write artifacts.

    A solver that aborts is recorded in ``aborted`` (and the manifest); the
    remaining solvers still run and write their files.
    """
    os.makedirs(out_dir, exist_ok=True)
    art = RunArtifacts(out_dir)
    exp = Experiment(config)  # validates the model before any work starts
    solvers = list(config.solvers)
    if not solvers:
        log.warning("no solvers requested; nothing to run")
    cfg = config.to_dict()
    if jobs > 1 and len(solvers) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(solvers))) as pool:
            results = list(pool.map(_run_one, [cfg] * len(solvers), solvers))
    else:
        results = [_run_one(cfg, s) for s in solvers]

    timings, events = {}, {}
    summary_rows = []
    for solver, out, err, secs in results:
        timings[solver] = secs
        if err is not None:
            art.aborted[solver] = err
            log.error("%s aborted: %s", solver, err)
            continue
        art.outcomes[solver] = out
        rep = out.report
        events[solver] = list(rep.events)
        art.convergence[solver] = write_convergence(
            os.path.join(out_dir, f"convergence_{solver}.csv"), out, deterministic
        )
        if out.states is not None:
            art.trajectories[solver] = write_trajectory(
                os.path.join(out_dir, f"trajectory_{solver}.csv"), out.states, out.controls
            )
        else:
            art.trajectories[solver] = write_solution(os.path.join(out_dir, f"solution_{solver}.csv"), out.solution)
        if any(r.weights is not None for r in rep.records):
            art.weights[solver] = write_weights(os.path.join(out_dir, f"weights_{solver}.csv"), out)
        summary_rows.append([solver, rep.iterations(), fmt(rep.final_cost), fmt(rep.best_cost), int(rep.converged)])

    oracle = exp.oracle() if solvers else {}
    if oracle:
        art.oracle = _write_csv(
            os.path.join(out_dir, "oracle.csv"), ["name", "value"], [[k, fmt(v)] for k, v in oracle.items()]
        )
    if solvers:
        art.summary = _write_csv(
            os.path.join(out_dir, "summary.csv"),
            ["solver", "iters", "final_cost", "best_cost", "converged"],
            summary_rows,
        )
    manifest = {
        "experiment": config.experiment,
        "config": cfg,
        "versions": _versions(),
        "deterministic": deterministic,
        "jobs": jobs,
        "wall_time_s": {s: (0.0 if deterministic else t) for s, t in timings.items()},
        "events": events,
        "aborted": art.aborted,
        "files": sorted(
            os.path.basename(p)
            for p in list(art.convergence.values()) + list(art.trajectories.values()) + list(art.weights.values())
        ),
    }
    art.manifest = os.path.join(out_dir, "manifest.json")
    with open(art.manifest, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if plots and art.convergence:
        from .plots import emit_plots

        art.plots = emit_plots(out_dir)
    return art
