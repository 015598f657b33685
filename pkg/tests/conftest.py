import numpy as np
import pytest

from tron.nonsmooth import NonSmoothObjective, SmoothComponentPair, SmoothFunction


def random_spd(rng, n, scale=1.0):
    A = rng.standard_normal((n, n))
    return scale * (A @ A.T / n + 0.1 * np.eye(n))


def random_convex_objective(rng, n=3, m=2):
    """Convex quadratic f plus m pairs of convex quadratics."""
    f = SmoothFunction.quadratic(random_spd(rng, n), rng.standard_normal(n))
    pairs = []
    for _ in range(m):
        g = SmoothFunction.quadratic(random_spd(rng, n, 0.5), rng.standard_normal(n), rng.standard_normal())
        gb = SmoothFunction.quadratic(random_spd(rng, n, 0.5), rng.standard_normal(n), rng.standard_normal())
        pairs.append(SmoothComponentPair(g, gb))
    return NonSmoothObjective(f, pairs, n)


def random_interior_weights(rng, m):
    t = rng.uniform(0.05, 0.95, size=m)
    return np.stack([t, 1.0 - t], axis=1)


def fd_grad(fun, y, h=1e-6):
    y = np.asarray(y, dtype=float)
    out = np.empty(y.size)
    for j in range(y.size):
        e = np.zeros(y.size)
        e[j] = h
        out[j] = (fun(y + e) - fun(y - e)) / (2 * h)
    return out


def fd_jac(fun, y, h=1e-6):
    y = np.asarray(y, dtype=float)
    cols = []
    for j in range(y.size):
        e = np.zeros(y.size)
        e[j] = h
        cols.append((np.asarray(fun(y + e)) - np.asarray(fun(y - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), floor))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
