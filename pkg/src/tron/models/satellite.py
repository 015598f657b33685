"""Linearised relative motion of a chaser about a target on a circular orbit.

State [p1, p2, p3, v1, v2, v3] in the target-centred frame, control the
applied force.  The default in-plane coupling uses the position term
2*n*p2 in the first acceleration; ``standard_cwh=True`` switches to the
textbook Clohessy-Wiltshire velocity coupling 2*n*v2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dynamics import discretize_exact_linear
from ..nonsmooth import SmoothFunction, l1_pairs
from ..problem import L1Penalty, NonSmoothTrajectoryProblem


@dataclass(frozen=True)
class SatelliteParams:
    mean_motion: float = 0.01
    mass: float = 1.0
    alpha: float = 1.0
    R: tuple = (0.1, 0.1, 0.1)
    Q: tuple = (100.0, 100.0, 100.0, 1.0, 1.0, 1.0)
    horizon: int = 60
    dt: float = 1.0
    x0: tuple = (10.0, 8.0, 2.0, 0.0, 0.0, 0.0)
    standard_cwh: bool = False

    def __post_init__(self):
        if not self.mean_motion > 0 or not self.mass > 0:
            raise ValueError("mean motion and mass must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if len(self.R) != 3 or len(self.Q) != 6 or len(self.x0) != 6:
            raise ValueError("R needs 3 entries, Q and x0 need 6")


def satellite_dynamics(params: SatelliteParams):
    """Continuous-time (A, B)."""
    n, m = params.mean_motion, params.mass
    A = np.zeros((6, 6))
    A[0:3, 3:6] = np.eye(3)
    A[3, 0] = 3.0 * n * n
    if params.standard_cwh:
        A[3, 4] = 2.0 * n
    else:
        A[3, 1] = 2.0 * n
    A[4, 3] = -2.0 * n
    A[5, 2] = -n * n
    B = np.zeros((6, 3))
    B[3:6, :] = np.eye(3) / m
    return A, B


def satellite_problem(params: SatelliteParams = SatelliteParams()) -> NonSmoothTrajectoryProblem:
    A, B = satellite_dynamics(params)
    dyn = discretize_exact_linear(A, B, params.dt, name="satellite")
    R = np.diag(params.R)
    P = np.zeros((9, 9))
    P[6:, 6:] = R
    stage = SmoothFunction.quadratic(P)
    pairs = l1_pairs(9, params.alpha, indices=range(6, 9)) if params.alpha > 0 else []
    terminal = SmoothFunction.quadratic(np.diag(params.Q))
    return NonSmoothTrajectoryProblem.uniform(
        dyn, params.horizon, stage, pairs, terminal,
        l1=L1Penalty(np.eye(3), params.alpha), name="satellite",
    )


def condensed_satellite_qp(params: SatelliteParams = SatelliteParams()):
    """(H, c, const) so the total cost is 0.5 U'HU + c'U + const + alpha ||U||_1."""
    from ..oracles import condensed_linear

    dyn = satellite_problem(params).dynamics
    Ad, Bd = dyn.linearize(np.zeros(6), np.zeros(3))
    T = params.horizon
    G, x_free = condensed_linear([Ad] * T, [Bd] * T, np.asarray(params.x0, dtype=float))
    GT = G[-6:]
    xT = x_free[-6:]
    Q = np.diag(params.Q)
    H = 2.0 * (np.kron(np.eye(T), np.diag(params.R)) + GT.T @ Q @ GT)
    c = 2.0 * GT.T @ Q @ xT
    return H, c, float(xT @ Q @ xT)


def satellite_oracle(params: SatelliteParams = SatelliteParams()):
    """Global optimum of the (convex) satellite problem over the stacked controls."""
    from ..oracles import prox_gradient_l1

    H, c, const = condensed_satellite_qp(params)
    res = prox_gradient_l1(H, c, const, np.full(c.size, params.alpha))
    return res.value, res.x.reshape(params.horizon, 3)
