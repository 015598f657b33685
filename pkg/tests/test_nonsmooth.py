import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fd_grad, fd_jac, random_convex_objective, random_interior_weights, rel_err
from tron.nonsmooth import (
    NonSmoothObjective,
    SimplexWeight,
    SmoothComponentPair,
    SmoothFunction,
    SmoothingSchedule,
    multiplicative_update,
    pair_lambdas,
    pair_softmax,
    raw_value,
    selection_derivatives,
    smoothed_derivatives,
    smoothed_gradient,
    smoothed_hessian,
    smoothed_value,
    subgradient,
    update_weights,
)


def abs_objective(f=None):
    f = f if f is not None else SmoothFunction.zero(1)
    pair = SmoothComponentPair(SmoothFunction.linear([1.0]), SmoothFunction.linear([-1.0]))
    return NonSmoothObjective(f, [pair], 1)


def const_pair_objective(c1, c2, f=None):
    pair = SmoothComponentPair(SmoothFunction.linear([0.0], c1), SmoothFunction.linear([0.0], c2))
    return NonSmoothObjective(f if f is not None else SmoothFunction.zero(1), [pair], 1)


SQUARE = SmoothFunction.quadratic(np.eye(1))
HALF = [(0.5, 0.5)]


# raw_value

def test_raw_value_abs():
    obj = abs_objective()
    assert raw_value(obj, [1.0]) == 1.0
    assert raw_value(obj, [0.0]) == 0.0


def test_raw_value_square_plus_abs():
    assert raw_value(abs_objective(SQUARE), [-2.0]) == 6.0


def test_raw_value_dimension_error_names_both():
    with pytest.raises(ValueError, match="2.*1"):
        raw_value(abs_objective(), [1.0, 2.0])


# update_weights

def test_update_equal_values_leave_weights():
    for c in (-3.0, 0.0, 7.5):
        out = update_weights(SimplexWeight(0.5, 0.5), (c, c), 1.0)
        assert out.theta1 == pytest.approx(0.5, abs=1e-15)
        assert out.theta2 == pytest.approx(0.5, abs=1e-15)


def test_update_vertex_is_absorbing_without_floor():
    out = update_weights(SimplexWeight(1.0, 0.0), (-5.0, 5.0), 1.0, floor=0.0)
    assert (out.theta1, out.theta2) == (1.0, 0.0)


def test_update_vertex_is_floored_by_default():
    out = update_weights(SimplexWeight(1.0, 0.0), (-5.0, 5.0), 1.0)
    assert out.theta2 > 0 and out.theta1 > 0.999


def test_update_known_value():
    # e/(1+e), 1/(1+e) from a 30-digit evaluation
    out = update_weights(SimplexWeight(0.5, 0.5), (1.0, 0.0), 1.0)
    assert out.theta1 == pytest.approx(0.731058578630004879, abs=1e-15)
    assert out.theta2 == pytest.approx(0.268941421369995121, abs=1e-15)


def test_update_errors():
    with pytest.raises(ValueError):
        update_weights(SimplexWeight(0.5, 0.5), (0.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        update_weights(SimplexWeight(0.5, 0.5), (0.0, 1.0), -1.0)
    with pytest.raises(ValueError):
        multiplicative_update(np.array([[0.0, 0.0]]), [0.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        SimplexWeight(0.0, 0.0)


# smoothed_value

def test_smoothed_value_equal_components():
    for eta in (1e-3, 1.0, 30.0):
        assert smoothed_value(const_pair_objective(2.5, 2.5), [0.0], HALF, eta) == pytest.approx(2.5, abs=1e-14)


def test_smoothed_value_known():
    assert smoothed_value(const_pair_objective(0.0, 1.0), [0.0], HALF, 1.0) == pytest.approx(
        0.620114506958277525, abs=1e-15
    )


def test_smoothed_value_small_eta_recovers_max():
    assert smoothed_value(const_pair_objective(0.0, 1.0), [0.0], HALF, 1e-6) == pytest.approx(1.0, abs=1e-6)


def test_smoothed_value_errors():
    obj = const_pair_objective(0.0, 1.0)
    with pytest.raises(ValueError):
        smoothed_value(obj, [0.0], HALF, 0.0)
    with pytest.raises(ValueError):
        smoothed_value(obj, [0.0], HALF * 2, 1.0)


# gradient and hessian examples

def test_gradient_symmetric_kink():
    assert smoothed_gradient(abs_objective(), [0.0], HALF, 1.0) == pytest.approx([0.0], abs=1e-15)


def test_gradient_constant_pair():
    obj = NonSmoothObjective(SQUARE, [SmoothComponentPair(SmoothFunction.zero(1), SmoothFunction.zero(1))], 1)
    for th in ([(0.5, 0.5)], [(0.1, 0.9)]):
        assert smoothed_gradient(obj, [3.0], th, 0.7) == pytest.approx([6.0])
        assert np.allclose(smoothed_hessian(obj, [3.0], th, 0.7), [[2.0]])


def test_hessian_abs_kink():
    # lam(1 - lam)/eta * (grad g - grad gbar)^2 = 0.25 * 4
    H = smoothed_hessian(abs_objective(), [0.0], HALF, 1.0)
    assert np.allclose(H, [[1.0]], rtol=0, atol=1e-14)
    fd = fd_jac(lambda y: smoothed_gradient(abs_objective(), y, HALF, 1.0), np.zeros(1))
    assert np.allclose(fd, [[1.0]], rtol=0, atol=1e-8)


def test_fd_gradient_and_hessian_random(rng):
    for _ in range(20):
        obj = random_convex_objective(rng)
        th = random_interior_weights(rng, obj.num_pairs)
        eta = float(rng.uniform(0.2, 3.0))
        y = rng.standard_normal(obj.dimension)
        g = smoothed_gradient(obj, y, th, eta)
        assert rel_err(g, fd_grad(lambda z: smoothed_value(obj, z, th, eta), y)) <= 1e-5
        H = smoothed_hessian(obj, y, th, eta)
        assert rel_err(H, fd_jac(lambda z: smoothed_gradient(obj, z, th, eta), y)) <= 1e-4


def test_gradient_is_lambda_combination(rng):
    # the loop form and the one-pass Jacobian form are independent code paths
    for _ in range(20):
        obj = random_convex_objective(rng, n=4, m=3)
        th = random_interior_weights(rng, 3)
        y = rng.standard_normal(4)
        lam = pair_lambdas(obj, y, th, 0.5)
        manual = obj.f.gradient(y) + sum(
            l * p.g.gradient(y) + (1 - l) * p.g_bar.gradient(y) for l, p in zip(lam, obj.pairs)
        )
        assert np.allclose(smoothed_gradient(obj, y, th, 0.5), manual, rtol=1e-14, atol=1e-14)
        assert np.allclose(smoothed_derivatives(obj, y, th, 0.5)[1], manual, rtol=1e-12, atol=1e-12)


def test_affine_batch_matches_pair_loop(rng):
    n, m = 5, 4
    A = rng.standard_normal((m, n))
    pairs = [SmoothComponentPair(SmoothFunction.linear(a, 0.3), SmoothFunction.linear(-a, -0.1)) for a in A]
    batched = NonSmoothObjective(SmoothFunction.quadratic(np.eye(n)), pairs, n)
    assert batched.batch is not None
    plain_pairs = [
        SmoothComponentPair(dataclasses.replace(p.g, affine=None), dataclasses.replace(p.g_bar, affine=None))
        for p in pairs
    ]
    plain = NonSmoothObjective(batched.f, plain_pairs, n)
    assert plain.batch is None
    th = random_interior_weights(rng, m)
    for _ in range(10):
        y = rng.standard_normal(n)
        for a, b in zip(smoothed_derivatives(batched, y, th, 0.3), smoothed_derivatives(plain, y, th, 0.3)):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
        assert raw_value(batched, y) == pytest.approx(raw_value(plain, y), rel=1e-14)


def test_selection_ties_pick_first():
    obj = abs_objective()
    _, grad, _ = selection_derivatives(obj, [0.0])
    assert grad == pytest.approx([1.0])
    assert subgradient(obj, [0.0]) == pytest.approx([1.0])


def test_hessian_falls_back_to_finite_differences():
    f = SmoothFunction(lambda y: float(np.sum(y ** 4)), lambda y: 4 * y ** 3, dim=2)
    assert np.allclose(f.hess(np.array([1.0, 2.0])), np.diag([12.0, 48.0]), rtol=1e-6, atol=1e-6)


# properties

finite = st.floats(-50, 50, allow_nan=False)
interior = st.floats(1e-6, 1 - 1e-6)
etas = st.floats(1e-3, 10.0)


@settings(max_examples=300, deadline=None)
@given(finite, finite, interior, etas)
def test_sandwich_bound(g, gb, t, eta):
    v, lam = pair_softmax(np.array([g]), np.array([gb]), np.array([t]), np.array([1 - t]), eta)
    hi = max(g, gb)
    lo = hi + eta * math.log(min(t, 1 - t))
    tol = 1e-12 * (1 + abs(hi))
    assert lo - tol <= v[0] <= hi + tol
    assert 0.0 <= lam[0] <= 1.0


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0.0, 1.0), st.floats(1e-3, 10.0))
def test_simplex_closure(g, gb, t, eta):
    if t == 0.0 and 1 - t == 0.0:
        return
    out = update_weights(SimplexWeight(t, 1 - t), (g, gb), eta)
    assert out.theta1 >= 0 and out.theta2 >= 0
    assert abs(out.theta1 + out.theta2 - 1.0) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(finite, finite, st.floats(0.01, 0.99))
def test_small_eta_limit(g, gb, t):
    obj = const_pair_objective(g, gb)
    for eta in (1.0, 0.1, 0.01, 0.001):
        gap = abs(smoothed_value(obj, [0.0], [(t, 1 - t)], eta) - raw_value(obj, [0.0]))
        assert gap <= eta * abs(math.log(min(t, 1 - t))) + 1e-12 * (1 + abs(g) + abs(gb))


def test_overflow_safety():
    eta = 1e-3
    obj = const_pair_objective(1e6, -1e6)
    assert np.isfinite(smoothed_value(obj, [0.0], HALF, eta))
    assert smoothed_value(obj, [0.0], HALF, eta) == pytest.approx(1e6 + eta * math.log(0.5), rel=1e-15)
    for vals in ((1e6, -1e6), (-1e6, 1e6), (1e6, 1e6)):
        out = update_weights(SimplexWeight(0.5, 0.5), vals, eta)
        assert np.isfinite(out.theta1) and np.isfinite(out.theta2)


# schedule

def test_schedule_monotone_and_vanishing():
    s = SmoothingSchedule(eta0=1.0, rate=0.9, max_outer_iters=300)
    e = s.etas()
    assert e[0] == 1.0 and np.all(np.diff(e) <= 0) and e[-1] < 1e-12
    c = SmoothingSchedule.constant(0.3, 10).etas()
    assert np.all(c == 0.3)
    assert s.eps(0) == 1e-2 and s.eps(2) == pytest.approx(1e-2 * 0.81)


def test_schedule_validation():
    for kw in ({"eta0": 0.0}, {"rate": 1.0}, {"decay": "cosine"}, {"max_outer_iters": 0}):
        with pytest.raises(ValueError):
            SmoothingSchedule(**kw)
