"""Per-iteration logging shared by every solver."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np


@dataclass
class IterationRecord:
    iteration: int
    wall_s: float
    cost: float
    grad_norm: float = float("nan")
    eta: float = float("nan")
    weights: Optional[np.ndarray] = None


@dataclass
class SolverReport:
    """What a solver did, one record per (outer) iteration.

    ``cost`` is always the true non-smooth objective, never a surrogate.
    """

    solver: str
    records: list = field(default_factory=list)
    solution: Any = None
    converged: bool = False
    events: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def log(self, record: IterationRecord) -> None:
        self.records.append(record)

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost for r in self.records])

    @property
    def final_cost(self) -> float:
        return self.records[-1].cost if self.records else float("nan")

    @property
    def best_cost(self) -> float:
        return float(np.min(self.costs)) if self.records else float("nan")

    def iterations(self) -> int:
        return len(self.records)

    def snapshot(self, include_wall: bool = True) -> list:
        """Plain tuples for equality checks; wall times optional."""
        out = []
        for r in self.records:
            w = None if r.weights is None else r.weights.tobytes()
            row = (r.iteration, r.cost, r.grad_norm, r.eta, w)
            out.append(row + (r.wall_s,) if include_wall else row)
        return out


class Stopwatch:
    """Monotonic seconds since construction."""

    def __init__(self):
        self._t0 = time.perf_counter()

    def __call__(self) -> float:
        return time.perf_counter() - self._t0


class SolverAbort(RuntimeError):
    """Raised when a solver hits a non-finite value or diverges."""
