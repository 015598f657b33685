import numpy as np
import pytest

from conftest import fd_grad, fd_jac, rel_err
from tron.dynamics import linear_model
from tron.ilqr import Trajectory
from tron.dynamics import rollout
from tron.models.diffdrive import DiffDriveWorld, diffdrive_problem
from tron.models.satellite import SatelliteParams, satellite_problem
from tron.nonsmooth import SmoothComponentPair, SmoothFunction, l1_pairs
from tron.problem import (
    NonSmoothTrajectoryProblem,
    WeightField,
    raw_trajectory_cost,
    smoothed_stage_costs,
    update_weight_field,
)
from tron.trajopt import smooth_part_costs


def scalar_problem(T=1, pairs=None, f=None):
    dyn = linear_model(np.eye(1), np.eye(1))
    f = f if f is not None else SmoothFunction.zero(2)
    pairs = l1_pairs(2, 1.0, indices=[1]) if pairs is None else pairs
    return NonSmoothTrajectoryProblem.uniform(dyn, T, f, pairs, SmoothFunction.zero(1))


def random_weights(problem, rng):
    w = WeightField.initial(problem)
    t = rng.uniform(0.05, 0.95, size=w.theta.shape[:2])
    w.theta[..., 0] = t
    w.theta[..., 1] = 1 - t
    return w


def test_zero_pairs_reduce_to_smooth_part(rng):
    P = np.diag([1.0, 2.0, 0.5])
    dyn = linear_model(np.eye(2), np.ones((2, 1)))
    f = SmoothFunction.quadratic(P, rng.standard_normal(3))
    prob = NonSmoothTrajectoryProblem.uniform(dyn, 4, f, [], SmoothFunction.quadratic(np.eye(2)))
    sm = smoothed_stage_costs(prob, WeightField.initial(prob), 0.7)
    for _ in range(10):
        x, u = rng.standard_normal(2), rng.standard_normal(1)
        assert sm.stage(2, x, u) == f.value(np.concatenate([x, u]))


def test_clear_obstacle_pair_vanishes_for_small_eta():
    world = DiffDriveWorld(obstacles=(((5.0, 5.0), 0.5),), margin=0.0)
    prob = diffdrive_problem(world)
    sm = smoothed_stage_costs(prob, WeightField.initial(prob), 1e-6)
    base = smooth_part_costs(prob)
    for p in ([0.0, 0.0], [2.0, 8.0], [4.0, 4.0]):
        x, u = np.array(p + [0.3]), np.array([0.2, -0.1])
        assert abs(sm.stage(3, x, u) - base.stage(3, x, u)) < 1e-5


def test_l1_pair_symmetric_at_origin():
    prob = scalar_problem()
    sm = smoothed_stage_costs(prob, WeightField.initial(prob), 1.0)
    v, lx, lu, *_ = sm.stage_derivatives(0, np.array([0.4]), np.array([0.0]))
    assert v == pytest.approx(0.0, abs=1e-15)
    assert lu == pytest.approx([0.0], abs=1e-15)


def test_raw_cost_examples():
    prob = satellite_problem()
    T = prob.horizon
    traj = Trajectory(np.zeros((T + 1, 6)), np.zeros((T, 3)))
    assert raw_trajectory_cost(prob, traj) == 0.0
    single = scalar_problem()
    assert raw_trajectory_cost(single, Trajectory(np.zeros((2, 1)), np.array([[-3.0]]))) == 3.0


def test_raw_cost_matches_scripted_sum(rng):
    p = SatelliteParams(horizon=8, alpha=0.7)
    prob = satellite_problem(p)
    U = rng.standard_normal((8, 3))
    X = rollout(prob.dynamics, np.asarray(p.x0), U)
    R, Q = np.diag(p.R), np.diag(p.Q)
    expected = sum(u @ R @ u + p.alpha * np.abs(u).sum() for u in U) + X[-1] @ Q @ X[-1]
    assert raw_trajectory_cost(prob, Trajectory(X, U)) == pytest.approx(expected, rel=1e-13)


def test_shape_errors():
    prob = scalar_problem(T=3)
    with pytest.raises(ValueError):
        raw_trajectory_cost(prob, Trajectory(np.zeros((3, 1)), np.zeros((3, 1))))
    other = scalar_problem(T=2)
    with pytest.raises(ValueError):
        smoothed_stage_costs(prob, WeightField.initial(other), 1.0)


def test_trajectory_sandwich(rng):
    p = SatelliteParams(horizon=10, alpha=2.0)
    prob = satellite_problem(p)
    for eta in (1.0, 0.1, 0.01):
        w = random_weights(prob, rng)
        U = rng.standard_normal((10, 3))
        X = rollout(prob.dynamics, np.asarray(p.x0), U)
        raw = raw_trajectory_cost(prob, Trajectory(X, U))
        sm = smoothed_stage_costs(prob, w, eta).total(X, U)
        slack = sum(eta * np.log(np.min(w.stage(t), axis=1)).sum() for t in range(prob.horizon + 1) if w.counts[t])
        assert raw + slack - 1e-9 <= sm <= raw + 1e-9


def test_smoothed_stage_derivatives_fd(rng):
    prob = diffdrive_problem()
    w = random_weights(prob, rng)
    sm = smoothed_stage_costs(prob, w, 0.5)
    n = 3
    for _ in range(10):
        x = np.array([*rng.uniform(0, 9, 2), rng.uniform(-1, 1)])
        u = rng.standard_normal(2)
        t = int(rng.integers(1, prob.horizon))
        v, lx, lu, lxx, luu, lux = sm.stage_derivatives(t, x, u)
        z = np.concatenate([x, u])
        fun = lambda zz: sm.stage(t, zz[:n], zz[n:])
        g = fd_grad(fun, z)
        assert rel_err(np.concatenate([lx, lu]), g) <= 1e-4
        gradf = lambda zz: np.concatenate(sm.stage_derivatives(t, zz[:n], zz[n:])[1:3])
        H = fd_jac(gradf, z)
        assert rel_err(lxx, H[:n, :n]) <= 1e-4
        assert rel_err(luu, H[n:, n:], floor=1e-6) <= 1e-4
        assert np.allclose(lux, H[n:, :n], atol=1e-4)


def test_batched_obstacles_match_pair_list(rng):
    from tron.nonsmooth import NonSmoothObjective, smoothed_derivatives

    prob = diffdrive_problem()
    obj = prob.stage_objective(5)
    plain = NonSmoothObjective(obj.f, obj.pairs, obj.dimension, batch=None)
    # an explicit None still auto-detects, so build a loop-only copy by hand
    object.__setattr__(plain, "batch", None)
    th = rng.uniform(0.1, 0.9, size=(obj.num_pairs, 1))
    th = np.hstack([th, 1 - th])
    for _ in range(5):
        z = np.array([*rng.uniform(0, 9, 2), 0.2, 0.3, -0.1])
        a = smoothed_derivatives(obj, z, th, 0.4)
        b = smoothed_derivatives(plain, z, th, 0.4)
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        assert np.allclose(a[1], b[1], rtol=1e-10, atol=1e-10)
        assert np.allclose(a[2], b[2], rtol=1e-5, atol=1e-4)  # loop path finite-differences the Hessian


def test_weight_field_update_stays_on_simplex(rng):
    prob = satellite_problem(SatelliteParams(horizon=5))
    w = WeightField.initial(prob)
    assert w.on_simplex()
    for _ in range(5):
        U = 10 * rng.standard_normal((5, 3))
        traj = Trajectory(rollout(prob.dynamics, np.zeros(6), U), U)
        w = update_weight_field(prob, w, traj, 0.01)
        assert w.on_simplex()
    with pytest.raises(IndexError):
        w.at(prob.horizon, 0)
