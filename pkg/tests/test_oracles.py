import numpy as np
import pytest

from tron.models.lasso import generate_lasso
from tron.models.satellite import SatelliteParams, condensed_satellite_qp, satellite_oracle, satellite_problem
from tron.oracles import condensed_linear, lasso_oracle, prox_gradient_l1, riccati_lqr, soft_threshold

cp = pytest.importorskip("cvxpy")


def test_soft_threshold_vectorised():
    v = np.array([3.0, -3.0, 0.2, 0.0])
    assert soft_threshold(v, 1.0) == pytest.approx([2.0, -2.0, 0.0, 0.0])


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_lasso_oracle_vs_cvxpy(seed):
    inst, _ = generate_lasso(seed)
    w = cp.Variable(2)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(inst.X @ w - inst.y) / inst.N + inst.rho * cp.norm1(w)))
    prob.solve()
    res = lasso_oracle(inst.X, inst.y, inst.rho)
    assert res.value <= prob.value * (1 + 1e-7)
    assert abs(res.value - prob.value) / prob.value < 1e-6


def test_satellite_oracle_vs_cvxpy():
    p = SatelliteParams()
    H, c, const = condensed_satellite_qp(p)
    U = cp.Variable(c.size)
    objective = 0.5 * cp.quad_form(U, cp.psd_wrap(H)) + c @ U + const + p.alpha * cp.norm1(U)
    ref = cp.Problem(cp.Minimize(objective))
    # H is badly conditioned; the interior-point solver is the accurate one here
    ref.solve(solver="CLARABEL")
    val, Uo = satellite_oracle(p)
    assert val <= ref.value * (1 + 1e-5)
    assert abs(val - ref.value) / ref.value < 1e-4


def test_condensed_qp_reproduces_cost(rng):
    from tron.dynamics import rollout
    from tron.ilqr import Trajectory
    from tron.problem import raw_trajectory_cost

    p = SatelliteParams(horizon=12)
    H, c, const = condensed_satellite_qp(p)
    prob = satellite_problem(p)
    U = rng.standard_normal((12, 3))
    X = rollout(prob.dynamics, np.asarray(p.x0), U)
    u = U.ravel()
    assert 0.5 * u @ H @ u + c @ u + const + p.alpha * np.abs(u).sum() == pytest.approx(
        raw_trajectory_cost(prob, Trajectory(X, U)), rel=1e-10
    )


def test_riccati_vs_condensed_least_squares(rng):
    n, m, T = 3, 2, 10
    A = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    Q, R, QT = np.eye(n), 0.5 * np.eye(m), 3 * np.eye(n)
    x0 = rng.standard_normal(n)
    sol = riccati_lqr([A] * T, [B] * T, [Q] * T, [R] * T, [np.zeros((m, n))] * T, QT, x0)
    G, xf = condensed_linear([A] * T, [B] * T, x0)
    # stacked states x_0..x_T = G U + xf; Q on x_0..x_{T-1}, QT on x_T
    W = np.kron(np.eye(T + 1), Q)
    W[-n:, -n:] = QT
    Hq = 2 * (G.T @ W @ G + np.kron(np.eye(T), R))
    cq = 2 * G.T @ W @ xf
    U = np.linalg.solve(Hq, -cq)
    cost = U @ (0.5 * Hq) @ U + cq @ U + xf @ W @ xf
    assert sol.cost == pytest.approx(cost, rel=1e-10)
    assert np.allclose(sol.controls.ravel(), U, atol=1e-9)


def test_prox_gradient_separable():
    # 0.5 x'Hx + c'x + w|x| with diagonal H has the soft-threshold minimiser
    H = np.diag([2.0, 4.0, 1.0])
    c = np.array([-3.0, 0.5, 0.2])
    w = np.full(3, 1.0)
    res = prox_gradient_l1(H, c, 0.0, w)
    assert np.allclose(res.x, soft_threshold(-c, w) / np.diag(H), atol=1e-12)
