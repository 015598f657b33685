"""Reference solutions computed by routes independent of the smoothing solvers.

* ``prox_gradient_l1`` is accelerated proximal gradient (FISTA) for
  smooth-quadratic-plus-weighted-L1 problems.
* ``riccati_lqr`` is the textbook discrete Riccati recursion.
* ``condensed_linear`` stacks a linear time-varying rollout into
  x = x_free + G u so the trajectory cost becomes a function of u alone.
"""
from __future__ import annotations

from typing import NamedTuple, Optional, Sequence

import numpy as np


def soft_threshold(v, kappa):
    """sign(v) * max(|v| - kappa, 0), elementwise."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


class ProxResult(NamedTuple):
    x: np.ndarray
    value: float
    iterations: int


def prox_gradient_l1(
    H: np.ndarray,
    c: np.ndarray,
    const: float,
    weights: np.ndarray,
    x0: Optional[np.ndarray] = None,
    tol: float = 1e-13,
    max_iters: int = 200000,
) -> ProxResult:
    """Minimise 0.5 x'Hx + c'x + const + sum_j weights_j |x_j| by FISTA with restarts."""
    H = np.asarray(H, dtype=float)
    c = np.asarray(c, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = c.size
    L = float(np.linalg.eigvalsh(H).max())
    if L <= 0:
        L = 1.0
    step = 1.0 / L

    def obj(x):
        return float(0.5 * x @ H @ x + c @ x + const + w @ np.abs(x))

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    res = _fista(H, c, w, x, step, obj, tol, max_iters)
    return _polish(H, c, w, res, obj)


def _polish(H, c, w, res: ProxResult, obj) -> ProxResult:
    """Active-set refinement: solve the KKT system on the FISTA support and sign pattern.

    Accepted only if the refined point is sign-consistent, satisfies the
    zero-coordinate subgradient bound, and does not increase the objective.
    """
    x = res.x
    for _ in range(10):
        S = np.abs(x) > 0
        if not S.any():
            break
        s = np.sign(x[S])
        try:
            xs = np.linalg.solve(H[np.ix_(S, S)], -(c[S] + w[S] * s))
        except np.linalg.LinAlgError:
            break
        cand = np.zeros_like(x)
        cand[S] = xs
        grad = H @ cand + c
        flipped = np.sign(xs) != s
        if flipped.any():
            # drop coordinates that crossed zero and retry
            x = cand.copy()
            x[np.flatnonzero(S)[flipped]] = 0.0
            continue
        slack = np.abs(grad[~S]) - w[~S]
        if slack.size and slack.max() > 1e-9 * (1.0 + np.abs(grad).max()):
            break
        val = obj(cand)
        if val <= res.value:
            return ProxResult(cand, val, res.iterations)
        break
    return res


def _fista(H, c, w, x, step, obj, tol, max_iters) -> ProxResult:
    n = c.size
    yk, t = x.copy(), 1.0
    f_prev = obj(x)
    for it in range(1, max_iters + 1):
        x_new = soft_threshold(yk - step * (H @ yk + c), step * w)
        f_new = obj(x_new)
        if f_new > f_prev:
            if t == 1.0:
                # a plain prox step from x failed to descend: rounding floor reached
                return ProxResult(x, f_prev, it)
            # adaptive restart keeps the iteration monotone
            yk, t = x.copy(), 1.0
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        yk = x_new + ((t - 1.0) / t_new) * (x_new - x)
        moved = np.linalg.norm(x_new - x)
        x, t = x_new, t_new
        if moved <= tol * (1.0 + np.linalg.norm(x)) and f_prev - f_new <= tol * (1.0 + abs(f_new)):
            f_prev = f_new
            return ProxResult(x, f_new, it)
        f_prev = f_new
    return ProxResult(x, obj(x), max_iters)


def lasso_oracle(X, y, rho) -> ProxResult:
    """Optimum of (1/N)||Xw - y||^2 + rho ||w||_1."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    N = X.shape[0]
    H = 2.0 * X.T @ X / N
    c = -2.0 * X.T @ y / N
    return prox_gradient_l1(H, c, float(y @ y) / N, np.full(X.shape[1], rho))


class LqrSolution(NamedTuple):
    cost: float
    controls: np.ndarray
    states: np.ndarray
    gains: list


def riccati_lqr(As, Bs, Qs, Rs, Ns, QT, x0, qs=None, rs=None, qT=None) -> LqrSolution:
    """Finite-horizon LQR with cost

        sum_t x'Q_t x + u'R_t u + 2 u'N_t x + q_t'x + r_t'u  +  x_T'Q_T x_T + q_T'x_T

    (no halving) under x_{t+1} = A_t x_t + B_t u_t.  Returns the optimal cost.
    """
    T = len(As)
    n = As[0].shape[0]
    m = Bs[0].shape[1]
    qs = [np.zeros(n)] * T if qs is None else qs
    rs = [np.zeros(m)] * T if rs is None else rs
    qT = np.zeros(n) if qT is None else qT
    # value function V(x) = x'P x + p'x + s
    P, p = np.array(QT, dtype=float), np.array(qT, dtype=float)
    Ks, ks = [None] * T, [None] * T
    for t in reversed(range(T)):
        A, B = As[t], Bs[t]
        Hxx = Qs[t] + A.T @ P @ A
        Huu = Rs[t] + B.T @ P @ B
        Hux = Ns[t] + B.T @ P @ A
        hx = qs[t] + A.T @ p
        hu = rs[t] + B.T @ p
        K = -np.linalg.solve(Huu, Hux)
        k = -0.5 * np.linalg.solve(Huu, hu)
        Ks[t], ks[t] = K, k
        P = Hxx + Hux.T @ K
        P = 0.5 * (P + P.T)
        # the k-dependent linear terms cancel because Huu K = -Hux
        p = hx + K.T @ hu
    xs = [np.array(x0, dtype=float)]
    us = []
    cost = 0.0
    for t in range(T):
        x = xs[-1]
        u = Ks[t] @ x + ks[t]
        cost += x @ Qs[t] @ x + u @ Rs[t] @ u + 2.0 * u @ Ns[t] @ x + qs[t] @ x + rs[t] @ u
        us.append(u)
        xs.append(As[t] @ x + Bs[t] @ u)
    cost += xs[-1] @ QT @ xs[-1] + qT @ xs[-1]
    return LqrSolution(float(cost), np.array(us), np.array(xs), Ks)


def condensed_linear(As: Sequence[np.ndarray], Bs: Sequence[np.ndarray], x0):
    """(G, x_free) with stacked states X = x_free + G U, X = [x_0; ...; x_T]."""
    T = len(As)
    n, m = Bs[0].shape
    G = np.zeros(((T + 1) * n, T * m))
    x_free = np.zeros((T + 1) * n)
    x_free[:n] = x0
    for t in range(T):
        rows = slice((t + 1) * n, (t + 2) * n)
        prev = slice(t * n, (t + 1) * n)
        x_free[rows] = As[t] @ x_free[prev]
        G[rows] = As[t] @ G[prev]
        G[rows, t * m:(t + 1) * m] += Bs[t]
    return G, x_free
