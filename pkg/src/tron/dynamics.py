"""Discrete-time dynamics models and integrators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm


@dataclass(frozen=True)
class DynamicsModel:
    """x_{t+1} = step(x_t, u_t), optionally with analytic Jacobians (A, B)."""

    state_dim: int
    control_dim: int
    step: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobians: Optional[Callable[[np.ndarray, np.ndarray], tuple]] = None
    name: str = ""

    def __call__(self, x, u) -> np.ndarray:
        return self.step(x, u)

    def linearize(self, x, u):
        """(A, B) at (x, u); central differences when no analytic form is given."""
        if self.jacobians is not None:
            return self.jacobians(x, u)
        return fd_jacobians(self.step, x, u)


def fd_jacobians(step, x, u):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n, m = x.size, u.size
    A = np.empty((n, n))
    B = np.empty((n, m))
    for j in range(n):
        h = 1e-6 * (1.0 + abs(x[j]))
        e = np.zeros(n)
        e[j] = h
        A[:, j] = (step(x + e, u) - step(x - e, u)) / (2 * h)
    for j in range(m):
        h = 1e-6 * (1.0 + abs(u[j]))
        e = np.zeros(m)
        e[j] = h
        B[:, j] = (step(x, u + e) - step(x, u - e)) / (2 * h)
    return A, B


def rollout(dynamics: DynamicsModel, x0, controls) -> np.ndarray:
    """States x_0..x_T obtained by applying ``controls`` from ``x0``."""
    controls = np.asarray(controls, dtype=float).reshape(-1, dynamics.control_dim)
    T = controls.shape[0]
    X = np.empty((T + 1, dynamics.state_dim))
    X[0] = x0
    for t in range(T):
        X[t + 1] = dynamics.step(X[t], controls[t])
        if not np.all(np.isfinite(X[t + 1])):
            raise FloatingPointError(f"non-finite state at timestep {t + 1}")
    return X


def discretize_rk3(
    F: Callable, dt: float, state_dim: int, control_dim: int, name: str = "", jacobian: Optional[Callable] = None
) -> DynamicsModel:
    """Kutta's third-order scheme with the control held over the step.

    ``jacobian(x, u) -> (Fx, Fu)`` of the vector field, when given, is
    chained through the three stages to give exact step Jacobians.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")

    def step(x, u):
        k1 = F(x, u)
        k2 = F(x + 0.5 * dt * k1, u)
        k3 = F(x - dt * k1 + 2.0 * dt * k2, u)
        out = x + (dt / 6.0) * (k1 + 4.0 * k2 + k3)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite value in RK3 stage evaluation")
        return out

    jac = None
    if jacobian is not None:
        I = np.eye(state_dim)

        def jac(x, u):
            k1 = F(x, u)
            x2 = x + 0.5 * dt * k1
            k2 = F(x2, u)
            x3 = x - dt * k1 + 2.0 * dt * k2
            A1, B1 = jacobian(x, u)
            A2, B2 = jacobian(x2, u)
            A3, B3 = jacobian(x3, u)
            # d k_i / d x and d k_i / d u
            k1x, k1u = A1, B1
            k2x = A2 @ (I + 0.5 * dt * k1x)
            k2u = A2 @ (0.5 * dt * k1u) + B2
            k3x = A3 @ (I - dt * k1x + 2.0 * dt * k2x)
            k3u = A3 @ (-dt * k1u + 2.0 * dt * k2u) + B3
            Ad = I + (dt / 6.0) * (k1x + 4.0 * k2x + k3x)
            Bd = (dt / 6.0) * (k1u + 4.0 * k2u + k3u)
            return Ad, Bd

    return DynamicsModel(state_dim, control_dim, step, jac, name=name)


def zoh_matrices(A, B, dt: float):
    """(A_d, B_d) of the exact zero-order-hold discretisation."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, m = B.shape
    if A.shape != (n, n):
        raise ValueError(f"A must be square and match B's rows, got {A.shape} and {B.shape}")
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = expm(M * dt)
    return E[:n, :n].copy(), E[:n, n:].copy()


def linear_model(Ad, Bd, name: str = "") -> DynamicsModel:
    Ad = np.array(Ad, dtype=float)
    Bd = np.array(Bd, dtype=float)
    return DynamicsModel(
        Ad.shape[0],
        Bd.shape[1],
        lambda x, u: Ad @ x + Bd @ u,
        lambda x, u: (Ad, Bd),
        name=name,
    )


def discretize_exact_linear(A, B, dt: float, name: str = "") -> DynamicsModel:
    Ad, Bd = zoh_matrices(A, B, dt)
    return linear_model(Ad, Bd, name=name)
