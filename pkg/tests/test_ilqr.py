import numpy as np
import pytest

from tron.dynamics import discretize_rk3, linear_model
from tron.ilqr import (
    FunctionStageCosts,
    IlqrOptions,
    QuadraticStageCosts,
    ilqr_solve,
    trajectory_gradient,
)
from tron.models.diffdrive import diffdrive_dynamics
from tron.nonsmooth import SmoothFunction
from tron.oracles import riccati_lqr


def random_lqr(rng, n=4, m=2, T=30):
    A = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    Mq = rng.standard_normal((n, n))
    Q = Mq @ Mq.T / n + 0.1 * np.eye(n)
    Mr = rng.standard_normal((m, m))
    R = Mr @ Mr.T / m + 0.1 * np.eye(m)
    QT = 5 * Q
    x0 = rng.standard_normal(n)
    return A, B, Q, R, QT, x0, T


def solve_pair(rng, **kw):
    A, B, Q, R, QT, x0, T = random_lqr(rng, **kw)
    dyn = linear_model(A, B)
    n, m = B.shape
    costs = QuadraticStageCosts([Q] * T, [R] * T, QT)
    traj, rep = ilqr_solve(dyn, costs, x0, np.zeros((T, m)))
    ref = riccati_lqr([A] * T, [B] * T, [Q] * T, [R] * T, [np.zeros((m, n))] * T, QT, x0)
    return dyn, costs, x0, traj, rep, ref


def test_matches_riccati(rng):
    for _ in range(5):
        _, _, _, traj, rep, ref = solve_pair(rng)
        assert abs(rep.final_cost - ref.cost) / abs(ref.cost) < 1e-6
        assert np.allclose(traj.controls, ref.controls, atol=1e-6)


def test_optimal_start_is_fixed_point(rng):
    dyn, costs, x0, traj, rep, ref = solve_pair(rng)
    t2, r2 = ilqr_solve(dyn, costs, x0, ref.controls)
    assert r2.extras["info"].iterations <= 2
    assert abs(r2.final_cost - ref.cost) <= 1e-10 * max(1.0, abs(ref.cost))


def test_zero_cost_returns_init(rng):
    dyn = discretize_rk3(lambda x, u: diffdrive_dynamics(x, u), 0.1, 3, 2)
    zero = SmoothFunction.zero(5)
    costs = FunctionStageCosts([zero] * 10, SmoothFunction.zero(3), 3, 2)
    U0 = rng.standard_normal((10, 2))
    traj, rep = ilqr_solve(dyn, costs, np.zeros(3), U0)
    assert np.array_equal(traj.controls, U0)
    assert rep.final_cost == 0.0


def test_monotone_and_consistent():
    dyn = discretize_rk3(lambda x, u: diffdrive_dynamics(x, u), 0.2, 3, 2)
    T = 25
    P = np.diag([0, 0, 0, 0.1, 0.1])
    costs = FunctionStageCosts(
        [SmoothFunction.quadratic(P)] * T, SmoothFunction.quadratic(np.diag([10.0, 10.0, 1.0]), center=[2.0, 1.0, 0.0]), 3, 2
    )
    traj, rep = ilqr_solve(dyn, costs, np.zeros(3), np.full((T, 2), 0.3))
    assert np.all(np.diff(rep.costs) <= 0)
    assert traj.is_consistent(dyn, atol=1e-10)
    assert rep.final_cost < costs.total(*_initial(dyn, T))


def _initial(dyn, T):
    from tron.dynamics import rollout

    U = np.full((T, 2), 0.3)
    return rollout(dyn, np.zeros(3), U), U


def test_gradient_against_finite_differences(rng):
    from tron.dynamics import rollout
    from tron.ilqr import Trajectory

    dyn = discretize_rk3(lambda x, u: diffdrive_dynamics(x, u), 0.2, 3, 2)
    T = 6
    P = np.diag([1.0, 0.5, 0.2, 0.1, 0.3])
    costs = FunctionStageCosts([SmoothFunction.quadratic(P)] * T, SmoothFunction.quadratic(np.eye(3), center=[1, 1, 0]), 3, 2)
    U = rng.standard_normal((T, 2))
    g = trajectory_gradient(dyn, costs, Trajectory(rollout(dyn, np.zeros(3), U), U))

    def J(Uf):
        Uf = Uf.reshape(T, 2)
        return costs.total(rollout(dyn, np.zeros(3), Uf), Uf)

    h = 1e-6
    fd = np.array([(J(U.ravel() + h * e) - J(U.ravel() - h * e)) / (2 * h) for e in np.eye(2 * T)])
    assert np.allclose(np.asarray(g).ravel(), fd, rtol=1e-5, atol=1e-6)


def test_warm_start_never_slower(rng):
    wins = 0
    for seed in range(20):
        r = np.random.default_rng(seed)
        A, B, Q, R, QT, x0, T = random_lqr(r)
        dyn = linear_model(A, B)
        costs = QuadraticStageCosts([Q] * T, [R] * T, QT)
        cold_traj, cold = ilqr_solve(dyn, costs, x0, np.zeros((T, 2)))
        # perturbed problem warm-started from the previous solution
        costs2 = QuadraticStageCosts([1.01 * Q] * T, [R] * T, QT)
        _, warm = ilqr_solve(dyn, costs2, x0, cold_traj.controls)
        _, cold2 = ilqr_solve(dyn, costs2, x0, np.zeros((T, 2)))
        wins += warm.extras["info"].iterations <= cold2.extras["info"].iterations
    assert wins == 20


def test_options_validation():
    with pytest.raises(ValueError):
        IlqrOptions(mu_increase=1.0)
    with pytest.raises(ValueError):
        IlqrOptions(alphas=())
