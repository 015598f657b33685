"""Iterative LQR for smooth stage costs under discrete dynamics.

Costs use true derivatives: near (x, u),

    l(x + dx, u + du) ~ l + lx'dx + lu'du + 1/2 [dx; du]' [[lxx, lux'], [lux, luu]] [dx; du]

Regularisation is a Levenberg shift on Q_uu.  Only steps that lower the
total cost are accepted, so the recorded cost sequence never increases.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dynamics import DynamicsModel, rollout
from .nonsmooth import SmoothFunction
from .report import IterationRecord, SolverAbort, SolverReport, Stopwatch


@dataclass
class Trajectory:
    states: np.ndarray  # (T+1, n)
    controls: np.ndarray  # (T, m)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        if self.states.ndim != 2 or self.controls.ndim != 2:
            raise ValueError("states and controls must be 2-D arrays")
        if self.states.shape[0] != self.controls.shape[0] + 1:
            raise ValueError(
                f"need T+1 states for T controls, got {self.states.shape[0]} and {self.controls.shape[0]}"
            )

    @property
    def horizon(self) -> int:
        return self.controls.shape[0]

    def copy(self) -> "Trajectory":
        return Trajectory(self.states.copy(), self.controls.copy())

    def is_consistent(self, dynamics: DynamicsModel, atol: float = 1e-10) -> bool:
        X = rollout(dynamics, self.states[0], self.controls)
        return bool(np.max(np.abs(X - self.states)) <= atol)


class StageCostSet:
    """Per-stage costs l_t(x, u), t < T, and terminal l_T(x).

    Subclasses implement the four ``stage*``/``terminal*`` methods.
    """

    horizon: int
    state_dim: int
    control_dim: int

    def stage(self, t, x, u) -> float:
        raise NotImplementedError

    def stage_derivatives(self, t, x, u):
        """(l, lx, lu, lxx, luu, lux)"""
        raise NotImplementedError

    def terminal(self, x) -> float:
        raise NotImplementedError

    def terminal_derivatives(self, x):
        """(l, lx, lxx)"""
        raise NotImplementedError

    def total(self, X, U) -> float:
        c = 0.0
        for t in range(U.shape[0]):
            c += self.stage(t, X[t], U[t])
        return float(c + self.terminal(X[-1]))


class FunctionStageCosts(StageCostSet):
    """Stage costs from SmoothFunctions of z = [x; u] and a terminal function of x."""

    def __init__(self, stage_fns, terminal_fn: SmoothFunction, state_dim: int, control_dim: int):
        self.stage_fns = list(stage_fns)
        self.terminal_fn = terminal_fn
        self.horizon = len(self.stage_fns)
        self.state_dim = state_dim
        self.control_dim = control_dim

    def stage(self, t, x, u):
        return float(self.stage_fns[t].value(np.concatenate([x, u])))

    def stage_derivatives(self, t, x, u):
        z = np.concatenate([x, u])
        f = self.stage_fns[t]
        n = self.state_dim
        g = f.gradient(z)
        H = f.hess(z)
        return float(f.value(z)), g[:n], g[n:], H[:n, :n], H[n:, n:], H[n:, :n]

    def terminal(self, x):
        return float(self.terminal_fn.value(x))

    def terminal_derivatives(self, x):
        f = self.terminal_fn
        return float(f.value(x)), f.gradient(x), f.hess(x)


class QuadraticStageCosts(StageCostSet):
    """x'Q x + u'R u + 2 u'N x + q'x + r'u per stage and x'Q_T x + q_T'x terminally (no halving)."""

    def __init__(self, Qs, Rs, QT, Ns=None, qs=None, rs=None, qT=None):
        self.Qs = [np.asarray(Q, dtype=float) for Q in Qs]
        self.Rs = [np.asarray(R, dtype=float) for R in Rs]
        self.horizon = len(self.Qs)
        n = self.Qs[0].shape[0]
        m = self.Rs[0].shape[0]
        self.state_dim, self.control_dim = n, m
        T = self.horizon
        self.Ns = [np.zeros((m, n))] * T if Ns is None else [np.asarray(N, dtype=float) for N in Ns]
        self.qs = [np.zeros(n)] * T if qs is None else [np.asarray(q, dtype=float) for q in qs]
        self.rs = [np.zeros(m)] * T if rs is None else [np.asarray(r, dtype=float) for r in rs]
        self.QT = np.asarray(QT, dtype=float)
        self.qT = np.zeros(n) if qT is None else np.asarray(qT, dtype=float)

    def stage(self, t, x, u):
        return float(
            x @ self.Qs[t] @ x + u @ self.Rs[t] @ u + 2.0 * u @ self.Ns[t] @ x + self.qs[t] @ x + self.rs[t] @ u
        )

    def stage_derivatives(self, t, x, u):
        Q, R, N = self.Qs[t], self.Rs[t], self.Ns[t]
        lx = (Q + Q.T) @ x + 2.0 * N.T @ u + self.qs[t]
        lu = (R + R.T) @ u + 2.0 * N @ x + self.rs[t]
        return self.stage(t, x, u), lx, lu, Q + Q.T, R + R.T, 2.0 * N

    def terminal(self, x):
        return float(x @ self.QT @ x + self.qT @ x)

    def terminal_derivatives(self, x):
        return self.terminal(x), (self.QT + self.QT.T) @ x + self.qT, self.QT + self.QT.T


@dataclass(frozen=True)
class IlqrOptions:
    max_iters: int = 100
    cost_tol: float = 1e-10
    mu_init: float = 1e-6
    mu_min: float = 1e-8
    mu_max: float = 1e10
    mu_increase: float = 10.0
    mu_decrease: float = 0.1
    alphas: tuple = tuple(2.0 ** -i for i in range(11))
    final_gradient: bool = True

    def __post_init__(self):
        if self.max_iters < 0 or self.cost_tol < 0:
            raise ValueError("max_iters and cost_tol must be nonnegative")
        if self.mu_init < 0 or self.mu_min < 0 or self.mu_max <= 0:
            raise ValueError("regularisation bounds must be nonnegative")
        if not self.mu_increase > 1 or not 0 < self.mu_decrease < 1:
            raise ValueError("mu_increase must exceed 1 and mu_decrease lie in (0, 1)")
        if not self.alphas or any(a <= 0 for a in self.alphas):
            raise ValueError("step sizes must be positive")


class _Derivs(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    lx: np.ndarray
    lu: np.ndarray
    lxx: np.ndarray
    luu: np.ndarray
    lux: np.ndarray
    lTx: np.ndarray
    lTxx: np.ndarray


def _derivatives(dynamics: DynamicsModel, costs: StageCostSet, X, U) -> _Derivs:
    T, m = U.shape
    n = X.shape[1]
    A = np.empty((T, n, n))
    B = np.empty((T, n, m))
    lx = np.empty((T, n))
    lu = np.empty((T, m))
    lxx = np.empty((T, n, n))
    luu = np.empty((T, m, m))
    lux = np.empty((T, m, n))
    for t in range(T):
        A[t], B[t] = dynamics.linearize(X[t], U[t])
        _, lx[t], lu[t], lxx[t], luu[t], lux[t] = costs.stage_derivatives(t, X[t], U[t])
    _, lTx, lTxx = costs.terminal_derivatives(X[T])
    return _Derivs(A, B, lx, lu, lxx, luu, lux, np.asarray(lTx, dtype=float), np.asarray(lTxx, dtype=float))


def control_gradient(d: _Derivs) -> np.ndarray:
    """Gradient of the total cost w.r.t. the open-loop controls (adjoint recursion)."""
    T = d.lu.shape[0]
    G = np.empty_like(d.lu)
    lam = d.lTx
    for t in reversed(range(T)):
        G[t] = d.lu[t] + d.B[t].T @ lam
        lam = d.lx[t] + d.A[t].T @ lam
    return G


def trajectory_gradient(dynamics: DynamicsModel, costs: StageCostSet, traj: Trajectory) -> np.ndarray:
    return control_gradient(_derivatives(dynamics, costs, traj.states, traj.controls))


def _backward(d: _Derivs, mu: float):
    T, n, m = d.B.shape[0], d.B.shape[1], d.B.shape[2]
    k = np.empty((T, m))
    K = np.empty((T, m, n))
    Vx = d.lTx.copy()
    Vxx = d.lTxx.copy()
    dV1 = dV2 = 0.0
    eye = np.eye(m)
    for t in reversed(range(T)):
        A, B = d.A[t], d.B[t]
        Qx = d.lx[t] + A.T @ Vx
        Qu = d.lu[t] + B.T @ Vx
        VxxA = Vxx @ A
        Qxx = d.lxx[t] + A.T @ VxxA
        Quu = d.luu[t] + B.T @ Vxx @ B
        Qux = d.lux[t] + B.T @ VxxA
        Quu = 0.5 * (Quu + Quu.T)
        try:
            c = cho_factor(Quu + mu * eye, lower=True, check_finite=False)
        except LinAlgError:
            return None
        kt = -cho_solve(c, Qu, check_finite=False)
        Kt = -cho_solve(c, Qux, check_finite=False)
        k[t], K[t] = kt, Kt
        dV1 += kt @ Qu
        dV2 += 0.5 * kt @ Quu @ kt
        Vx = Qx + Kt.T @ Quu @ kt + Kt.T @ Qu + Qux.T @ kt
        Vxx = Qxx + Kt.T @ Quu @ Kt + Kt.T @ Qux + Qux.T @ Kt
        Vxx = 0.5 * (Vxx + Vxx.T)
    # factorisation skips finiteness checks, so catch NaN/inf here once
    if not (np.isfinite(dV1 + dV2) and np.all(np.isfinite(K))):
        return None
    return k, K, dV1, dV2


def _forward(dynamics: DynamicsModel, costs: StageCostSet, X, U, k, K, alpha):
    T = U.shape[0]
    Xn = np.empty_like(X)
    Un = np.empty_like(U)
    Xn[0] = X[0]
    cost = 0.0
    for t in range(T):
        Un[t] = U[t] + alpha * k[t] + K[t] @ (Xn[t] - X[t])
        cost += costs.stage(t, Xn[t], Un[t])
        Xn[t + 1] = dynamics.step(Xn[t], Un[t])
        if not np.all(np.isfinite(Xn[t + 1])):
            return None
    cost += costs.terminal(Xn[T])
    if not np.isfinite(cost):
        return None
    return Xn, Un, float(cost)


class IlqrInfo(NamedTuple):
    iterations: int
    converged: bool
    failed: bool
    stalled: bool
    gradient: Optional[np.ndarray]


def ilqr_solve(
    dynamics: DynamicsModel,
    costs: StageCostSet,
    x0,
    u_init,
    opts: IlqrOptions = IlqrOptions(),
    solver_name: str = "ilqr",
):
    """Returns ``(trajectory, report)``; ``report.extras["info"]`` holds an IlqrInfo."""
    clock = Stopwatch()
    U = np.array(u_init, dtype=float).reshape(-1, dynamics.control_dim)
    X = rollout(dynamics, x0, U)
    J = costs.total(X, U)
    if not np.isfinite(J):
        raise SolverAbort("non-finite cost on the initial rollout")
    report = SolverReport(solver_name)
    mu = opts.mu_init
    converged = failed = stalled = False
    d = None
    it = 0
    while it < opts.max_iters:
        if d is None:
            d = _derivatives(dynamics, costs, X, U)
        it += 1
        bw = _backward(d, mu)
        while bw is None:
            mu = max(mu * opts.mu_increase, opts.mu_min)
            if mu > opts.mu_max:
                break
            bw = _backward(d, mu)
        if bw is None:
            failed = True
            report.events.append(f"backward pass failed at iteration {it} (mu > {opts.mu_max:g})")
            break
        k, K, dV1, dV2 = bw
        if -(dV1 + dV2) <= opts.cost_tol * max(abs(J), 1e-300) or not np.any(k):
            converged = True
            break
        accepted = None
        for alpha in opts.alphas:
            fw = _forward(dynamics, costs, X, U, k, K, alpha)
            if fw is not None and fw[2] < J:
                accepted = fw
                break
        if accepted is None:
            mu = max(mu * opts.mu_increase, opts.mu_min)
            if mu > opts.mu_max:
                stalled = True
                report.events.append(f"line search failed at iteration {it} with mu at its cap")
                break
            continue
        Xn, Un, Jn = accepted
        improvement = J - Jn
        X, U, J = Xn, Un, Jn
        d = None
        mu *= opts.mu_decrease
        if mu < opts.mu_min:
            mu = 0.0
        report.log(IterationRecord(it, clock(), J))
        if improvement <= opts.cost_tol * max(abs(J), 1e-300):
            converged = True
            break
    if not report.records:  # nothing accepted: record the unchanged cost
        report.log(IterationRecord(0, clock(), J))
    grad = None
    if opts.final_gradient:
        if d is None:
            d = _derivatives(dynamics, costs, X, U)
        grad = control_gradient(d)
        if report.records:
            report.records[-1].grad_norm = float(np.linalg.norm(grad))
    traj = Trajectory(X, U)
    report.solution = traj
    report.converged = converged
    report.extras["info"] = IlqrInfo(it, converged, failed, stalled, grad)
    report.extras["cost"] = J
    return traj, report
