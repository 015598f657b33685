"""Synthetic lasso instances: (1/N)||Xw - y||^2 + rho ||w||_1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nonsmooth import NonSmoothObjective, SmoothFunction, l1_pairs


@dataclass(frozen=True)
class LassoInstance:
    X: np.ndarray
    y: np.ndarray
    rho: float
    seed: int
    w_true: np.ndarray

    @property
    def N(self) -> int:
        return self.X.shape[0]

    def objective(self) -> NonSmoothObjective:
        N = self.N
        X, y = self.X, self.y
        H = 2.0 * X.T @ X / N
        Xty = X.T @ y / N

        def value(w):
            r = X @ w - y
            return float(r @ r) / N

        f = SmoothFunction(value, lambda w: H @ w - 2.0 * Xty, lambda w: H.copy(), dim=X.shape[1])
        return NonSmoothObjective(f, l1_pairs(X.shape[1], self.rho), X.shape[1])


def generate_lasso(seed: int, N: int = 1000, d: int = 2, rho: float = 0.05, noise: float = 0.01):
    """Standard-normal design, sparse ground truth with one zero coordinate.

    Nonzero true coefficients sit just above the soft-threshold level rho/2,
    so the optimum is small but nonzero in those coordinates and every
    coordinate is close to a kink.  Returns ``(instance, objective)``.
    """
    if N < 1 or d < 1:
        raise ValueError("N and d must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, d))
    w_true = (0.5 * rho + rng.uniform(0.0015, 0.003, size=d)) * rng.choice([-1.0, 1.0], size=d)
    w_true[rng.integers(d)] = 0.0
    y = X @ w_true + noise * rng.standard_normal(N)
    inst = LassoInstance(X, y, float(rho), int(seed), w_true)
    return inst, inst.objective()
