"""Differential-drive robot among circular obstacles.

State x = [p_x, p_y, theta], control u = [v_l, v_r] (wheel speeds).  Each
stage t >= 1 penalises penetration through max(0, -rho * nu * (d_i(x) - margin))
for every obstacle i, where d_i is the clearance between the robot disc and
the obstacle disc.  Optimal paths rest exactly on the penalty boundary, so
a small positive ``margin`` keeps them strictly clear of the real obstacles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dynamics import discretize_rk3
from ..nonsmooth import PairBatch, SmoothComponentPair, SmoothFunction
from ..problem import NonSmoothTrajectoryProblem

#: length scale of the smooth floor inside the distance square root
DIST_EPS = 1e-6

DEFAULT_OBSTACLES = (
    ((2.0, 1.6), 0.8),
    ((3.6, 4.0), 1.0),
    ((1.4, 4.4), 0.7),
    ((5.6, 2.4), 0.9),
    ((6.3, 5.9), 1.0),
    ((4.2, 7.4), 0.8),
    ((7.8, 4.2), 0.7),
    ((2.6, 7.2), 0.6),
    ((8.2, 7.8), 0.5),
    ((7.0, 0.8), 0.6),
    ((0.6, 2.6), 0.4),
)


@dataclass(frozen=True)
class DiffDriveWorld:
    wheel_sep: float = 0.5
    robot_radius: float = 0.2
    obstacles: tuple = DEFAULT_OBSTACLES
    start: tuple = (0.0, 0.0, np.pi / 4)
    goal: tuple = (9.0, 9.0, np.pi / 4)
    Q: tuple = (100.0, 100.0, 10.0)
    R: tuple = (0.1, 0.1)
    rho: float = 1.0
    nu: float = 100.0
    u_nominal: tuple = (0.0, 0.0)
    horizon: int = 60
    dt: float = 0.25
    margin: float = 0.05

    def __post_init__(self):
        for c, r in self.obstacles:
            if not r > 0 or len(c) != 2:
                raise ValueError(f"obstacle needs a 2-D center and positive radius, got {c}, {r}")
        if not self.wheel_sep > 0 or self.robot_radius < 0:
            raise ValueError("wheel separation must be positive and robot radius nonnegative")
        if self.rho < 0 or self.nu < 0 or self.margin < 0:
            raise ValueError("rho, nu and margin must be nonnegative")
        if len(self.start) != 3 or len(self.goal) != 3 or len(self.Q) != 3 or len(self.R) != 2:
            raise ValueError("start, goal and Q need 3 entries, R needs 2")

    @property
    def centers(self) -> np.ndarray:
        return np.array([c for c, _ in self.obstacles], dtype=float).reshape(-1, 2)

    @property
    def radii(self) -> np.ndarray:
        return np.array([r for _, r in self.obstacles], dtype=float)

    def straight_line_controls(self) -> np.ndarray:
        """Equal wheel speeds that drive the start heading straight for the goal distance."""
        d = np.hypot(self.goal[0] - self.start[0], self.goal[1] - self.start[1])
        v = d / (self.horizon * self.dt)
        return np.full((self.horizon, 2), v)


def diffdrive_dynamics(x, u, wheel_sep: float = 0.5) -> np.ndarray:
    """Continuous vector field."""
    v = 0.5 * (u[0] + u[1])
    return np.array([v * np.cos(x[2]), v * np.sin(x[2]), (u[1] - u[0]) / wheel_sep])


def diffdrive_jacobian(x, u, wheel_sep: float = 0.5):
    v = 0.5 * (u[0] + u[1])
    c, s = np.cos(x[2]), np.sin(x[2])
    A = np.array([[0.0, 0.0, -v * s], [0.0, 0.0, v * c], [0.0, 0.0, 0.0]])
    B = np.array([[0.5 * c, 0.5 * c], [0.5 * s, 0.5 * s], [-1.0 / wheel_sep, 1.0 / wheel_sep]])
    return A, B


def signed_distances(world: DiffDriveWorld, p) -> np.ndarray:
    """Clearance to every obstacle; negative under penetration."""
    diff = np.asarray(p, dtype=float)[:2] - world.centers
    return np.sqrt((diff * diff).sum(axis=1) + DIST_EPS ** 2) - world.robot_radius - world.radii


class ObstaclePairs(PairBatch):
    """Pairs (0, -s * (d_i(x) - margin)) over z = [x; u] for every obstacle."""

    def __init__(self, world: DiffDriveWorld, dim: int):
        self.world = world
        self.scale = world.rho * world.nu
        self.dim = dim
        self.zeros = np.zeros(len(world.obstacles))
        self.Jzero = np.zeros((len(world.obstacles), dim))

    def values(self, z):
        return self.zeros, -self.scale * (signed_distances(self.world, z[:2]) - self.world.margin)

    def derivatives(self, z):
        w = self.world
        diff = z[:2] - w.centers
        r = np.sqrt((diff * diff).sum(axis=1) + DIST_EPS ** 2)
        gb = -self.scale * (r - w.robot_radius - w.radii - w.margin)
        unit = diff / r[:, None]
        Jb = np.zeros_like(self.Jzero)
        Jb[:, :2] = -self.scale * unit
        Hb = np.zeros((len(r), self.dim, self.dim))
        Hb[:, :2, :2] = -self.scale * (np.eye(2)[None] - unit[:, :, None] * unit[:, None, :]) / r[:, None, None]
        return self.zeros, gb, self.Jzero, Jb, None, Hb


def obstacle_pair_list(world: DiffDriveWorld, dim: int):
    """The same pairs as ``ObstaclePairs`` as individual smooth functions."""
    scale = world.rho * world.nu
    pairs = []
    for c, rad in world.obstacles:
        c = np.asarray(c, dtype=float)
        off = world.robot_radius + rad + world.margin

        def value(z, c=c, off=off):
            d = z[:2] - c
            return float(-scale * (np.sqrt(d @ d + DIST_EPS ** 2) - off))

        def gradient(z, c=c):
            d = z[:2] - c
            g = np.zeros(dim)
            g[:2] = -scale * d / np.sqrt(d @ d + DIST_EPS ** 2)
            return g

        pairs.append(SmoothComponentPair(SmoothFunction.zero(dim), SmoothFunction(value, gradient, dim=dim)))
    return pairs


def diffdrive_problem(world: DiffDriveWorld = DiffDriveWorld()) -> NonSmoothTrajectoryProblem:
    n, m = 3, 2
    dyn = discretize_rk3(
        lambda x, u: diffdrive_dynamics(x, u, world.wheel_sep),
        world.dt, n, m, name="diffdrive",
        jacobian=lambda x, u: diffdrive_jacobian(x, u, world.wheel_sep),
    )
    T = world.horizon
    R = np.zeros((n + m, n + m))
    R[n:, n:] = np.diag(world.R)
    ubar = np.concatenate([np.zeros(n), world.u_nominal])
    control = SmoothFunction.quadratic(R, center=ubar)
    # the first stage also anchors x_0 to the start state
    P0 = R.copy()
    P0[:n, :n] = np.diag(world.Q)
    first = SmoothFunction.quadratic(P0, center=np.concatenate([world.start, world.u_nominal]))
    pairs = obstacle_pair_list(world, n + m)
    batch = ObstaclePairs(world, n + m)
    stage_pairs = [[]] + [pairs] * (T - 1)
    batches = [None] + [batch] * (T - 1)
    terminal = SmoothFunction.quadratic(np.diag(world.Q), center=np.asarray(world.goal, dtype=float))
    return NonSmoothTrajectoryProblem(
        dyn, T, [first] + [control] * (T - 1), stage_pairs, terminal,
        stage_batches=batches, name="diffdrive",
    )
