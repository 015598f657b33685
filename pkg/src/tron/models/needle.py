"""Bevel-tip steerable needle with pose X in SE(3).

Control u = [v, w, delta]: insertion speed, base twist rate and curvature.
In the body frame the twist has angular part omega = [v*delta, 0, w] and
linear part [0, 0, v], and the pose evolves by X' = X U.  Stepping uses the
closed-form exponential, so it is exact for controls held over the step.

For optimisation the state is the 6-vector [p, alpha, beta, gamma] with
Z-Y-X euler angles, R = Rz(alpha) Ry(beta) Rx(gamma).  The representation is
singular at beta = +-pi/2; the shipped setups stay well away from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dynamics import DynamicsModel
from ..nonsmooth import SmoothFunction, l1_pairs
from ..problem import L1Penalty, NonSmoothTrajectoryProblem

_SMALL_ANGLE = 1e-8


def skew(w) -> np.ndarray:
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def twist(u):
    """(omega, V) of the body twist for u = [v, w, delta]."""
    v, w, delta = float(u[0]), float(u[1]), float(u[2])
    return np.array([v * delta, 0.0, w]), np.array([0.0, 0.0, v])


def se3_exp(omega, V):
    """(R, p) = exp of the twist with angular part omega and linear part V."""
    theta = float(np.linalg.norm(omega))
    K = skew(omega)
    K2 = K @ K
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta ** 2 / 6.0
        b = 0.5 - theta ** 2 / 24.0
        c = 1.0 / 6.0 - theta ** 2 / 120.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta ** 2
        c = (theta - np.sin(theta)) / theta ** 3
    R = np.eye(3) + a * K + b * K2
    J = np.eye(3) + b * K + c * K2
    return R, J @ V


def orthonormalize(R) -> np.ndarray:
    """Nearest rotation matrix (polar factor via SVD)."""
    Us, _, Vt = np.linalg.svd(R)
    out = Us @ Vt
    if np.linalg.det(out) < 0:
        Us[:, -1] *= -1.0
        out = Us @ Vt
    return out


@dataclass(frozen=True)
class NeedleState:
    R: np.ndarray
    p: np.ndarray

    @classmethod
    def identity(cls) -> "NeedleState":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_vector(cls, x) -> "NeedleState":
        x = np.asarray(x, dtype=float)
        return cls(euler_to_rotation(x[3:6]), x[:3].copy())

    def to_vector(self, reference=None) -> np.ndarray:
        return np.concatenate([self.p, rotation_to_euler(self.R, reference)])

    def matrix(self) -> np.ndarray:
        X = np.eye(4)
        X[:3, :3] = self.R
        X[:3, 3] = self.p
        return X


def needle_step(X: NeedleState, u, dt: float) -> NeedleState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    omega, V = twist(u)
    Re, pe = se3_exp(omega * dt, V * dt)
    return NeedleState(orthonormalize(X.R @ Re), X.p + X.R @ pe)


def euler_to_rotation(angles) -> np.ndarray:
    a, b, g = angles
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    Rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    Ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cg, -sg], [0.0, sg, cg]])
    return Rz @ Ry @ Rx


def _wrap(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def rotation_to_euler(R, reference=None) -> np.ndarray:
    """Z-Y-X angles of R; alpha and gamma are unwrapped to lie nearest ``reference``."""
    beta = np.arcsin(np.clip(-R[2, 0], -1.0, 1.0))
    alpha = np.arctan2(R[1, 0], R[0, 0])
    gamma = np.arctan2(R[2, 1], R[2, 2])
    out = np.array([alpha, beta, gamma])
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        out[0] = ref[0] + _wrap(out[0] - ref[0])
        out[2] = ref[2] + _wrap(out[2] - ref[2])
    return out


@dataclass(frozen=True)
class NeedleParams:
    dt: float = 0.1
    horizon: int = 40
    start: tuple = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    goal: tuple = (1.0, 1.0, 3.5, 0.0, 0.0, 0.0)
    Q: tuple = (100.0, 100.0, 100.0, 0.0, 0.0, 0.0)
    R: tuple = (1.0, 0.1, 1.0)
    rho: float = 1.0
    u_nominal: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.dt > 0 or self.horizon < 1:
            raise ValueError("dt must be positive and horizon >= 1")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if len(self.start) != 6 or len(self.goal) != 6 or len(self.Q) != 6 or len(self.R) != 3:
            raise ValueError("start, goal and Q need 6 entries, R needs 3")

    def initial_controls(self) -> np.ndarray:
        return np.tile(np.asarray(self.u_nominal, dtype=float), (self.horizon, 1))


def _euler_batch(angles) -> np.ndarray:
    a, b, g = angles[:, 0], angles[:, 1], angles[:, 2]
    ca, sa, cb, sb, cg, sg = np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.cos(g), np.sin(g)
    R = np.empty((angles.shape[0], 3, 3))
    R[:, 0, 0] = ca * cb
    R[:, 0, 1] = ca * sb * sg - sa * cg
    R[:, 0, 2] = ca * sb * cg + sa * sg
    R[:, 1, 0] = sa * cb
    R[:, 1, 1] = sa * sb * sg + ca * cg
    R[:, 1, 2] = sa * sb * cg - ca * sg
    R[:, 2, 0] = -sb
    R[:, 2, 1] = cb * sg
    R[:, 2, 2] = cb * cg
    return R


def step_vectors(x, u, dt: float) -> np.ndarray:
    """Batched euler-vector step for x of shape (k, 6) and u of shape (k, 3).

    Composing exact rotations and reading back euler angles already lands on
    SO(3), so no separate re-orthonormalisation is applied here.
    """
    x = np.atleast_2d(x)
    u = np.atleast_2d(u)
    k = x.shape[0]
    v, w, delta = u[:, 0], u[:, 1], u[:, 2]
    phi = np.stack([v * delta, np.zeros(k), w], axis=1) * dt
    theta = np.linalg.norm(phi, axis=1)
    small = theta < _SMALL_ANGLE
    th = np.where(small, 1.0, theta)
    t2 = theta ** 2
    ca = np.where(small, 1.0 - t2 / 6.0, np.sin(th) / th)
    cb = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(th)) / th ** 2)
    cc = np.where(small, 1.0 / 6.0 - t2 / 120.0, (th - np.sin(th)) / th ** 3)
    K = np.zeros((k, 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -phi[:, 2], phi[:, 1]
    K[:, 1, 0], K[:, 1, 2] = phi[:, 2], -phi[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -phi[:, 1], phi[:, 0]
    K2 = K @ K
    I = np.eye(3)[None]
    Re = I + ca[:, None, None] * K + cb[:, None, None] * K2
    J = I + cb[:, None, None] * K + cc[:, None, None] * K2
    # body linear velocity is [0, 0, v]
    pe = J[:, :, 2] * (v * dt)[:, None]
    R = _euler_batch(x[:, 3:6])
    Rn = R @ Re
    out = np.empty((k, 6))
    out[:, :3] = x[:, :3] + np.einsum("kij,kj->ki", R, pe)
    out[:, 4] = np.arcsin(np.clip(-Rn[:, 2, 0], -1.0, 1.0))
    alpha = np.arctan2(Rn[:, 1, 0], Rn[:, 0, 0])
    gamma = np.arctan2(Rn[:, 2, 1], Rn[:, 2, 2])
    out[:, 3] = x[:, 3] + _wrap(alpha - x[:, 3])
    out[:, 5] = x[:, 5] + _wrap(gamma - x[:, 5])
    return out


def step_vector(x, u, dt: float) -> np.ndarray:
    """Single euler-vector step in scalar arithmetic (same maths as ``step_vectors``)."""
    px, py, pz, a, b, g = (float(t) for t in x)
    v, w, delta = (float(t) for t in u)
    k0, k2 = v * delta * dt, w * dt
    t2 = k0 * k0 + k2 * k2
    if t2 < _SMALL_ANGLE ** 2:
        ca, cb, cc = 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    else:
        th = math.sqrt(t2)
        ca = math.sin(th) / th
        cb = (1.0 - math.cos(th)) / t2
        cc = (th - math.sin(th)) / (t2 * th)
    # K = skew([k0, 0, k2]); Re = I + ca K + cb K^2; third column of J = I + cb K + cc K^2
    re = (
        (1.0 - cb * k2 * k2, -ca * k2, cb * k0 * k2),
        (ca * k2, 1.0 - cb * t2, -ca * k0),
        (cb * k0 * k2, ca * k0, 1.0 - cb * k0 * k0),
    )
    s = v * dt
    pe = (cc * k0 * k2 * s, -cb * k0 * s, (1.0 - cc * k0 * k0) * s)
    sa, ca_, sb, cb_, sg, cg = math.sin(a), math.cos(a), math.sin(b), math.cos(b), math.sin(g), math.cos(g)
    R = (
        (ca_ * cb_, ca_ * sb * sg - sa * cg, ca_ * sb * cg + sa * sg),
        (sa * cb_, sa * sb * sg + ca_ * cg, sa * sb * cg - ca_ * sg),
        (-sb, cb_ * sg, cb_ * cg),
    )
    out = np.empty(6)
    out[0] = px + R[0][0] * pe[0] + R[0][1] * pe[1] + R[0][2] * pe[2]
    out[1] = py + R[1][0] * pe[0] + R[1][1] * pe[1] + R[1][2] * pe[2]
    out[2] = pz + R[2][0] * pe[0] + R[2][1] * pe[1] + R[2][2] * pe[2]

    def rn(i, j):
        return R[i][0] * re[0][j] + R[i][1] * re[1][j] + R[i][2] * re[2][j]

    out[4] = math.asin(min(1.0, max(-1.0, -rn(2, 0))))
    alpha = math.atan2(rn(1, 0), rn(0, 0))
    gamma = math.atan2(rn(2, 1), rn(2, 2))
    out[3] = a + _wrap(alpha - a)
    out[5] = g + _wrap(gamma - g)
    return out


def needle_dynamics(dt: float) -> DynamicsModel:
    """Euler-vector dynamics; Jacobians by batched central differences."""

    def step(x, u):
        return step_vector(x, u, dt)

    def jac(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        z = np.concatenate([x, u])
        h = 1e-6 * (1.0 + np.abs(z))
        E = np.diag(h)
        Z = np.concatenate([z + E, z - E])
        out = step_vectors(Z[:, :6], Z[:, 6:], dt)
        D = (out[:9] - out[9:]) / (2.0 * h[:, None])
        return D[:6].T.copy(), D[6:].T.copy()

    return DynamicsModel(6, 3, step, jac, name="needle")


def needle_problem(params: NeedleParams = NeedleParams()) -> NonSmoothTrajectoryProblem:
    n, m = 6, 3
    T = params.horizon
    P = np.zeros((n + m, n + m))
    P[n:, n:] = np.diag(params.R)
    center = np.concatenate([np.zeros(n), params.u_nominal])
    control = SmoothFunction.quadratic(P, center=center)
    P0 = P.copy()
    P0[:n, :n] = np.diag(params.Q)
    first = SmoothFunction.quadratic(P0, center=np.concatenate([params.start, params.u_nominal]))
    pairs = l1_pairs(n + m, params.rho, indices=[n + 1]) if params.rho > 0 else []
    terminal = SmoothFunction.quadratic(np.diag(params.Q), center=np.asarray(params.goal, dtype=float))
    return NonSmoothTrajectoryProblem(
        needle_dynamics(params.dt), T, [first] + [control] * (T - 1), [pairs] * T, terminal,
        l1=L1Penalty(np.array([[0.0, 1.0, 0.0]]), params.rho), name="needle",
    )
