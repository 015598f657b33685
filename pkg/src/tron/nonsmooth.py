"""Max-of-smooth objectives and their adaptive log-sum-exp surrogate.

An objective here has the form

    F(y) = f(y) + sum_i max(g_i(y), gbar_i(y))

with every f, g_i, gbar_i smooth.  Each max term carries a weight pair
theta_i on the 2-simplex; the surrogate replaces the max by

    eta * log(theta_i1 * exp(g_i / eta) + theta_i2 * exp(gbar_i / eta))

which is smooth for eta > 0 and recovers the max as eta -> 0.  After the
surrogate is (approximately) minimised, the weights are moved with the
multiplicative rule theta_i <- theta_i * exp(g / eta) / Z.

All exponentials are taken after subtracting the pair-wise maximum, so
the routines are safe for large |g| / eta.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

#: default lower clamp applied to each weight after an update
WEIGHT_FLOOR = 1e-12


def _fd_hessian(grad: Callable[[np.ndarray], np.ndarray], y: np.ndarray) -> np.ndarray:
    """Central differences of a gradient, symmetrised."""
    y = np.asarray(y, dtype=float)
    n = y.size
    H = np.empty((n, n))
    for j in range(n):
        h = 1e-6 * (1.0 + abs(y[j]))
        e = np.zeros(n)
        e[j] = h
        H[:, j] = (np.asarray(grad(y + e)) - np.asarray(grad(y - e))) / (2 * h)
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class SmoothFunction:
    """A twice-differentiable scalar function on R^dim.

    ``hessian`` may be omitted, in which case it is obtained by central
    differences of ``gradient``.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dim: Optional[int] = None
    # (a, c) when the function is known to be y -> a.y + c; enables batched evaluation
    affine: Optional[tuple] = None

    def __call__(self, y):
        return self.value(y)

    def hess(self, y) -> np.ndarray:
        if self.hessian is not None:
            return np.asarray(self.hessian(y), dtype=float)
        return _fd_hessian(self.gradient, y)

    # constructors for the shapes that appear in practice

    @classmethod
    def zero(cls, dim: int) -> "SmoothFunction":
        return cls(
            value=lambda y: 0.0,
            gradient=lambda y: np.zeros(dim),
            hessian=lambda y: np.zeros((dim, dim)),
            dim=dim,
            affine=(np.zeros(dim), 0.0),
        )

    @classmethod
    def linear(cls, a, c: float = 0.0) -> "SmoothFunction":
        """y -> a.y + c"""
        a = np.asarray(a, dtype=float)
        n = a.size
        return cls(
            value=lambda y: float(a @ y + c),
            gradient=lambda y: a.copy(),
            hessian=lambda y: np.zeros((n, n)),
            dim=n,
            affine=(a, float(c)),
        )

    @classmethod
    def quadratic(cls, P, q=None, r: float = 0.0, center=None) -> "SmoothFunction":
        """(y - center)' P (y - center) + q'(y - center) + r.

        Note the factor: this is y'Py, not the halved form.
        """
        P = np.asarray(P, dtype=float)
        n = P.shape[0]
        q = np.zeros(n) if q is None else np.asarray(q, dtype=float)
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        Ps = P + P.T

        def value(y):
            d = np.asarray(y, dtype=float) - c
            return float(d @ P @ d + q @ d + r)

        return cls(
            value=value,
            gradient=lambda y: Ps @ (np.asarray(y, dtype=float) - c) + q,
            hessian=lambda y: Ps.copy(),
            dim=n,
        )


@dataclass(frozen=True)
class SmoothComponentPair:
    """The two smooth arguments of one ``max`` term."""

    g: SmoothFunction
    g_bar: SmoothFunction

    def __post_init__(self):
        if self.g.dim is not None and self.g_bar.dim is not None and self.g.dim != self.g_bar.dim:
            raise ValueError(f"pair components disagree on dimension: {self.g.dim} vs {self.g_bar.dim}")


class PairBatch:
    """Evaluates all M pairs of an objective at once.

    ``values(y)`` returns (g, gbar) as length-M arrays; ``derivatives(y)``
    returns (g, gbar, Jg, Jgbar, Hg, Hgbar) with Jacobians of shape (M, n)
    and Hessians of shape (M, n, n), or None for Hessians that vanish.
    """

    def values(self, y):
        raise NotImplementedError

    def derivatives(self, y):
        raise NotImplementedError


class AffinePairBatch(PairBatch):
    def __init__(self, Ag, cg, Ab, cb):
        self.Ag, self.cg, self.Ab, self.cb = Ag, cg, Ab, cb

    def values(self, y):
        return self.Ag @ y + self.cg, self.Ab @ y + self.cb

    def derivatives(self, y):
        g, gb = self.values(y)
        return g, gb, self.Ag, self.Ab, None, None


def _affine_batch(pairs, dim) -> Optional[AffinePairBatch]:
    fns = [f for p in pairs for f in (p.g, p.g_bar)]
    if not fns or not all(f.affine is not None and f.affine[0].size == dim for f in fns):
        return None
    return AffinePairBatch(
        np.array([p.g.affine[0] for p in pairs]),
        np.array([p.g.affine[1] for p in pairs]),
        np.array([p.g_bar.affine[0] for p in pairs]),
        np.array([p.g_bar.affine[1] for p in pairs]),
    )


@dataclass(frozen=True)
class NonSmoothObjective:
    """f(y) + sum_i max(g_i(y), gbar_i(y)) on R^dimension.

    ``batch`` optionally evaluates all pairs together; it must agree with
    ``pairs``.  Affine pairs get a batch automatically.
    """

    f: SmoothFunction
    pairs: tuple
    dimension: int
    batch: Optional[PairBatch]

    def __init__(self, f: SmoothFunction, pairs: Sequence[SmoothComponentPair], dimension: int,
                 batch: Optional[PairBatch] = None):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        pairs = tuple(pairs)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "dimension", int(dimension))
        object.__setattr__(self, "batch", batch if batch is not None else _affine_batch(pairs, int(dimension)))

    @property
    def num_pairs(self) -> int:
        return len(self.pairs)

    def check_point(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != self.dimension:
            raise ValueError(f"point has dimension {y.size}, objective expects {self.dimension}")
        return y


@dataclass(frozen=True)
class SimplexWeight:
    """A point (theta1, theta2) on the 2-simplex."""

    theta1: float = 0.5
    theta2: float = 0.5

    def __post_init__(self):
        t1, t2 = self.theta1, self.theta2
        if not (np.isfinite(t1) and np.isfinite(t2)) or t1 < 0 or t2 < 0:
            raise ValueError(f"weights must be finite and nonnegative, got ({t1}, {t2})")
        if abs(t1 + t2 - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {t1 + t2!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2])


WeightsLike = Union[Sequence[SimplexWeight], np.ndarray]


def weights_array(theta: WeightsLike, num_pairs: int) -> np.ndarray:
    """Coerce SimplexWeights, (theta1, theta2) pairs or an (M, 2) array to an (M, 2) array."""
    if isinstance(theta, np.ndarray):
        arr = np.asarray(theta, dtype=float).reshape(-1, 2)
    else:
        arr = np.array([w.as_array() if isinstance(w, SimplexWeight) else w for w in theta],
                       dtype=float).reshape(-1, 2)
    if arr.shape[0] != num_pairs:
        raise ValueError(f"got {arr.shape[0]} weight pairs for {num_pairs} max terms")
    return arr


def _check_eta(eta: float) -> None:
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")


# ---------------------------------------------------------------------------
# vectorised pair primitives


def pair_softmax(g, g_bar, theta1, theta2, eta):
    """Shifted log-sum-exp of a batch of pairs.

    Returns ``(value, lam)`` where ``value = eta*log(t1 e^{g/eta} + t2 e^{gbar/eta})``
    and ``lam`` is the normalised weight on ``g``.  Zero weights are allowed.
    """
    _check_eta(eta)
    g = np.asarray(g, dtype=float)
    g_bar = np.asarray(g_bar, dtype=float)
    with np.errstate(divide="ignore"):
        a1 = np.log(theta1) + g / eta
        a2 = np.log(theta2) + g_bar / eta
    lse = np.logaddexp(a1, a2)
    lam = np.exp(a1 - lse)
    return eta * lse, np.clip(lam, 0.0, 1.0)


def multiplicative_update(theta, g, g_bar, eta, floor: float = WEIGHT_FLOOR):
    """Vectorised weight update on an (..., 2) array of weights."""
    _check_eta(eta)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta.sum(axis=-1) <= 0):
        raise ValueError("weights must be nonnegative with a positive sum")
    with np.errstate(divide="ignore"):
        a1 = np.log(theta[..., 0]) + np.asarray(g, dtype=float) / eta
        a2 = np.log(theta[..., 1]) + np.asarray(g_bar, dtype=float) / eta
    lse = np.logaddexp(a1, a2)
    out = np.stack([np.exp(a1 - lse), np.exp(a2 - lse)], axis=-1)
    out /= out.sum(axis=-1, keepdims=True)
    if floor > 0:
        out = np.maximum(out, floor)
        out /= out.sum(axis=-1, keepdims=True)
    return out


# ---------------------------------------------------------------------------
# operations on NonSmoothObjective


def _pair_values(obj: NonSmoothObjective, y):
    if obj.batch is not None:
        return obj.batch.values(y)
    g = np.array([p.g.value(y) for p in obj.pairs], dtype=float)
    gb = np.array([p.g_bar.value(y) for p in obj.pairs], dtype=float)
    return g, gb


def _pair_derivatives(obj: NonSmoothObjective, y):
    """(g, gbar, Jg, Jgbar, Hg, Hgbar) for all pairs."""
    if obj.batch is not None:
        return obj.batch.derivatives(y)
    P = obj.pairs
    g, gb = _pair_values(obj, y)
    Jg = np.array([p.g.gradient(y) for p in P], dtype=float).reshape(len(P), -1)
    Jb = np.array([p.g_bar.gradient(y) for p in P], dtype=float).reshape(len(P), -1)
    Hg = np.array([p.g.hess(y) for p in P]) if P else None
    Hb = np.array([p.g_bar.hess(y) for p in P]) if P else None
    return g, gb, Jg, Jb, Hg, Hb


def raw_value(obj: NonSmoothObjective, y) -> float:
    """f(y) + sum of pair maxima, evaluated exactly."""
    y = obj.check_point(y)
    total = float(obj.f.value(y))
    if obj.num_pairs:
        g, gb = _pair_values(obj, y)
        total += float(np.maximum(g, gb).sum())
    return total


def update_weights(theta_prev: SimplexWeight, g_vals, eta: float, floor: float = WEIGHT_FLOOR) -> SimplexWeight:
    """One multiplicative step for a single pair, given (g(y), gbar(y))."""
    _check_eta(eta)
    t = theta_prev.as_array()
    if t.sum() <= 0:
        raise ValueError("previous weights are both zero")
    g1, g2 = float(g_vals[0]), float(g_vals[1])
    out = multiplicative_update(t, g1, g2, eta, floor=floor)
    return SimplexWeight(float(out[0]), float(out[1]))


def smoothed_value(obj: NonSmoothObjective, y, theta: WeightsLike, eta: float) -> float:
    _check_eta(eta)
    y = obj.check_point(y)
    th = weights_array(theta, obj.num_pairs)
    total = float(obj.f.value(y))
    if obj.num_pairs:
        g, gb = _pair_values(obj, y)
        vals, _ = pair_softmax(g, gb, th[:, 0], th[:, 1], eta)
        total += float(vals.sum())
    return total


def pair_lambdas(obj: NonSmoothObjective, y, theta: WeightsLike, eta: float) -> np.ndarray:
    """Convex-combination coefficient on ``g`` for every pair at ``y``."""
    _check_eta(eta)
    y = obj.check_point(y)
    th = weights_array(theta, obj.num_pairs)
    if not obj.num_pairs:
        return np.zeros(0)
    g, gb = _pair_values(obj, y)
    return pair_softmax(g, gb, th[:, 0], th[:, 1], eta)[1]


def smoothed_gradient(obj: NonSmoothObjective, y, theta: WeightsLike, eta: float) -> np.ndarray:
    """grad f + sum_i lam_i grad g_i + (1 - lam_i) grad gbar_i."""
    y = obj.check_point(y)
    lam = pair_lambdas(obj, y, theta, eta)
    grad = np.array(obj.f.gradient(y), dtype=float)
    for li, p in zip(lam, obj.pairs):
        grad += li * p.g.gradient(y) + (1.0 - li) * p.g_bar.gradient(y)
    return grad


def smoothed_hessian(obj: NonSmoothObjective, y, theta: WeightsLike, eta: float) -> np.ndarray:
    return smoothed_derivatives(obj, y, theta, eta)[2]


def smoothed_derivatives(obj: NonSmoothObjective, y, theta: WeightsLike, eta: float):
    """Value, gradient and Hessian of the surrogate in one pass."""
    _check_eta(eta)
    y = obj.check_point(y)
    th = weights_array(theta, obj.num_pairs)
    val = float(obj.f.value(y))
    grad = np.array(obj.f.gradient(y), dtype=float)
    hess = np.array(obj.f.hess(y), dtype=float)
    if obj.num_pairs:
        g, gb, Jg, Jb, Hg, Hb = _pair_derivatives(obj, y)
        v, lam = pair_softmax(g, gb, th[:, 0], th[:, 1], eta)
        val += float(v.sum())
        grad += lam @ Jg + (1.0 - lam) @ Jb
        if Hg is not None:
            hess += np.tensordot(lam, Hg, axes=1)
        if Hb is not None:
            hess += np.tensordot(1.0 - lam, Hb, axes=1)
        D = Jg - Jb
        hess += (D.T * (lam * (1.0 - lam) / eta)) @ D
    return val, grad, 0.5 * (hess + hess.T)


def selection_derivatives(obj: NonSmoothObjective, y):
    """Value, subgradient and Hessian of the max-achieving components.

    Ties go to ``g`` (the first component).
    """
    y = obj.check_point(y)
    val = float(obj.f.value(y))
    grad = np.array(obj.f.gradient(y), dtype=float)
    hess = np.array(obj.f.hess(y), dtype=float)
    if obj.num_pairs:
        g, gb, Jg, Jb, Hg, Hb = _pair_derivatives(obj, y)
        pick = g >= gb
        val += float(np.where(pick, g, gb).sum())
        grad += np.where(pick[:, None], Jg, Jb).sum(axis=0)
        if Hg is not None:
            hess += Hg[pick].sum(axis=0)
        if Hb is not None:
            hess += Hb[~pick].sum(axis=0)
    return val, grad, hess


def subgradient(obj: NonSmoothObjective, y) -> np.ndarray:
    y = obj.check_point(y)
    grad = np.array(obj.f.gradient(y), dtype=float)
    for p in obj.pairs:
        c = p.g if p.g.value(y) >= p.g_bar.value(y) else p.g_bar
        grad += c.gradient(y)
    return grad


def l1_pairs(dim: int, scale: float = 1.0, indices: Optional[Sequence[int]] = None):
    """Pairs (s*y_j, -s*y_j), whose maxima sum to s*||y_J||_1."""
    idx = range(dim) if indices is None else indices
    out = []
    for j in idx:
        e = np.zeros(dim)
        e[j] = scale
        out.append(SmoothComponentPair(SmoothFunction.linear(e), SmoothFunction.linear(-e)))
    return out


@dataclass(frozen=True)
class SmoothingSchedule:
    """Smoothing levels eta^k and inner tolerances eps^k for k = 1..K.

    ``decay="geometric"`` gives eta^k = eta0 * rate**(k-1); ``"constant"``
    keeps eta0 throughout.  Tolerances follow eps^k = eps0 * eps_decay**k.
    """

    eta0: float = 1.0
    decay: str = "geometric"
    rate: float = 0.9
    eps0: float = 1e-2
    eps_decay: float = 0.9
    max_outer_iters: int = 100

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if self.decay not in ("geometric", "constant"):
            raise ValueError(f"unknown decay mode {self.decay!r}")
        if self.decay == "geometric" and not 0 < self.rate < 1:
            raise ValueError("geometric rate must lie in (0, 1)")
        if not self.eps0 > 0 or not 0 < self.eps_decay <= 1:
            raise ValueError("eps0 must be positive and eps_decay in (0, 1]")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")

    @classmethod
    def constant(cls, eta: float, max_outer_iters: int, **kw) -> "SmoothingSchedule":
        return cls(eta0=eta, decay="constant", max_outer_iters=max_outer_iters, **kw)

    def eta(self, k: int) -> float:
        if self.decay == "constant":
            return self.eta0
        return self.eta0 * self.rate ** (k - 1)

    def eps(self, k: int) -> float:
        return self.eps0 * self.eps_decay ** k

    def etas(self) -> np.ndarray:
        return np.array([self.eta(k) for k in range(1, self.max_outer_iters + 1)])
