"""Domain types for smoothed online convex optimization instances.

Decisions are stored as ``(T, n)`` arrays and parameters as ``(T, p)`` arrays.
All cost callbacks must broadcast over leading axes, so that a whole
trajectory can be evaluated in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class InstanceError(ValueError):
    """Raised when inputs do not describe a valid instance."""


@dataclass(frozen=True)
class FeasibleSet:
    """Axis-aligned box, or all of R^n when ``lower``/``upper`` are None."""

    dim: int
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.dim < 1:
            raise InstanceError("dimension must be positive")
        if (self.lower is None) != (self.upper is None):
            raise InstanceError("box needs both lower and upper bounds")
        if self.lower is not None:
            lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dim,)).copy()
            hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dim,)).copy()
            if not np.all(lo < hi):
                raise InstanceError("box requires lower < upper in every coordinate")
            lo.flags.writeable = False
            hi.flags.writeable = False
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    @classmethod
    def box(cls, lower, upper, dim: Optional[int] = None) -> "FeasibleSet":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if dim is None:
            dim = max(lower.size, upper.size)
        return cls(dim, lower, upper)

    @classmethod
    def whole_space(cls, dim: int) -> "FeasibleSet":
        return cls(dim)

    @property
    def is_box(self) -> bool:
        return self.lower is not None

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise InstanceError(f"expected last dimension {self.dim}, got {x.shape[-1]}")
        if not self.is_box:
            return x.copy()
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        if not self.is_box:
            return bool(np.all(np.isfinite(x)))
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


def project(fset: FeasibleSet, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``fset`` (per-coordinate clamp)."""
    return fset.project(x)


@dataclass(frozen=True)
class CostSpec:
    """Parameterized stage cost ``f(x; theta)`` plus a switching cost.

    ``d`` takes a window of consecutive decisions, most recent first:
    ``d(x_t, x_{t-1})`` when ``arity == 2`` and ``d(x_t, x_{t-1}, x_{t-2})``
    when ``arity == 3``. ``grad_d`` returns one partial gradient per argument,
    in the same order.

    The regularity constants are declared, not derived; see
    :func:`check_constants` for a sampling-based sanity check.
    """

    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d: Callable[..., np.ndarray]
    grad_d: Callable[..., tuple]
    alpha: float
    l_f: float
    l_d: float
    h: float
    G: float = math.inf
    beta: float = 0.0
    arity: int = 2
    name: str = "custom"
    # marks C(x; theta) as quadratic in x, enabling the exact banded solve
    quadratic: bool = False
    # closed-form sup_x |f(x;a) - f(x;b)| over a feasible set, if known
    sup_diff: Optional[Callable[[np.ndarray, np.ndarray, FeasibleSet], float]] = None
    L_override: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise InstanceError("strong convexity alpha must be positive")
        if self.l_f < self.alpha:
            raise InstanceError("l_f must be at least alpha")
        if self.l_d < 0 or self.h < 0 or self.G < 0 or self.beta < 0:
            raise InstanceError("l_d, h, G, beta must be nonnegative")
        if self.arity not in (2, 3):
            raise InstanceError("switching cost arity must be 2 or 3")

    @property
    def reach(self) -> int:
        """How many stages a decision couples to on each side."""
        return self.arity - 1

    @property
    def L(self) -> float:
        """Smoothness constant of the total cost C(x; theta)."""
        if self.L_override is not None:
            return self.L_override
        # every x_t appears in ``arity`` switching terms
        return self.l_f + self.arity * self.l_d

    def with_L(self, L: float) -> "CostSpec":
        from dataclasses import replace

        return replace(self, L_override=float(L))


def quadratic_tracking_cost(alpha: float, beta: float, G: float = math.inf) -> CostSpec:
    """f = (alpha/2)||x - theta||^2 and d = (beta/2)||x - x'||^2."""
    if not alpha > 0:
        raise InstanceError("alpha must be positive")
    if beta < 0:
        raise InstanceError("beta must be nonnegative")
    a, b = float(alpha), float(beta)

    def f(x, th):
        r = np.asarray(x) - th
        return 0.5 * a * np.sum(r * r, axis=-1)

    def grad_f(x, th):
        return a * (np.asarray(x) - th)

    def d(x, xp):
        r = np.asarray(x) - xp
        return 0.5 * b * np.sum(r * r, axis=-1)

    def grad_d(x, xp):
        g = b * (np.asarray(x) - xp)
        return g, -g

    def sup_diff(th1, th0, fset):
        # f(x;th1) - f(x;th0) = a/2(|th1|^2 - |th0|^2) - a<x, th1 - th0>, affine in x
        diff = np.asarray(th1, float) - th0
        c = 0.5 * a * (np.dot(th1, th1) - np.dot(th0, th0))
        return _sup_abs_affine(c, -a * diff, fset)

    return CostSpec(f, grad_f, d, grad_d, alpha=a, l_f=a, l_d=2.0 * b, h=a, G=G,
                    beta=b, arity=2, name="quadratic", quadratic=True, sup_diff=sup_diff,
                    meta={"alpha": a, "beta": b})


def linear_quadratic_cost(alpha: float, beta: float, G: float = math.inf) -> CostSpec:
    """f = (alpha/2)(||x||^2 - 2<theta, x>) with quadratic switching cost.

    Same gradients as the tracking family, but the stage costs differ by a
    theta-dependent constant, which changes the environment variation.
    """
    base = quadratic_tracking_cost(alpha, beta, G)
    a = base.alpha

    def f(x, th):
        x = np.asarray(x)
        return 0.5 * a * (np.sum(x * x, axis=-1) - 2.0 * np.sum(th * x, axis=-1))

    def sup_diff(th1, th0, fset):
        return _sup_abs_affine(0.0, -a * (np.asarray(th1, float) - th0), fset)

    from dataclasses import replace

    return replace(base, f=f, sup_diff=sup_diff, name="linear-quadratic")


def second_difference_cost(alpha: float, beta: float, k1: float, k2: float, g: float,
                           dt: float, G: float = math.inf) -> CostSpec:
    """Tracking cost with a penalty on the thrust needed to realize x.

    The switching term is ``(beta/2) u^2`` with
    ``u = ((x_t - 2 x_{t-1} + x_{t-2}) / dt^2 + g - k2) / k1``.
    """
    if dt <= 0:
        raise InstanceError("time step must be positive")
    a, b = float(alpha), float(beta)
    scale = 1.0 / (k1 * dt * dt)
    offset = (g - k2) / k1
    base = quadratic_tracking_cost(a, 0.0, G)

    def thrust(x, xm1, xm2):
        return scale * (np.asarray(x) - 2.0 * np.asarray(xm1) + xm2) + offset

    def d(x, xm1, xm2):
        u = thrust(x, xm1, xm2)
        return 0.5 * b * np.sum(u * u, axis=-1)

    def grad_d(x, xm1, xm2):
        gu = b * scale * thrust(x, xm1, xm2)
        return gu, -2.0 * gu, gu

    # Hessian of d in (x, xm1, xm2) is b*scale^2 * v v^T with v = (1, -2, 1)
    l_d = 6.0 * b * scale * scale
    return CostSpec(base.f, base.grad_f, d, grad_d, alpha=a, l_f=a, l_d=l_d, h=a, G=G,
                    beta=0.0, arity=3, name="second-difference", quadratic=True,
                    sup_diff=base.sup_diff,
                    meta={"alpha": a, "beta": b, "k1": k1, "k2": k2, "g": g, "dt": dt,
                          "thrust": thrust})


def _sup_abs_affine(c: float, w: np.ndarray, fset: FeasibleSet) -> float:
    """sup over the set of |c + <w, x>|."""
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        return abs(float(c))
    if not fset.is_box:
        raise InstanceError("variation is unbounded on an unconstrained set; supply a box")
    lo = np.sum(np.minimum(w * fset.lower, w * fset.upper))
    hi = np.sum(np.maximum(w * fset.lower, w * fset.upper))
    return float(max(abs(c + lo), abs(c + hi)))


def as_trajectory(theta, T: Optional[int] = None) -> np.ndarray:
    """Coerce parameters or decisions to a finite ``(T, dim)`` float array."""
    arr = np.asarray(theta, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InstanceError("trajectory must be 1-D or 2-D")
    if T is not None and arr.shape[0] != T:
        raise InstanceError(f"expected horizon {T}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InstanceError("trajectory entries must be finite")
    return arr


def history(spec: CostSpec, x0) -> np.ndarray:
    """Decisions before stage 1, oldest first, padded to ``arity - 1`` rows.

    A single ``x0`` is repeated, i.e. the system starts at rest.
    """
    h = np.asarray(x0, dtype=float)
    if h.ndim == 1:
        h = h[None, :]
    need = spec.arity - 1
    if h.shape[0] < need:
        h = np.vstack([np.repeat(h[:1], need - h.shape[0], axis=0), h])
    return h[-need:]


def check_constants(spec: CostSpec, n: int, p: int, samples: int = 1000, seed: int = 0,
                    scale: float = 3.0, eps: float = 1e-6) -> dict:
    """Sample-based check of the declared alpha, l_f and h.

    Returns the largest observed violation of each inequality (<= 0 means
    the declared constant held on every sample).
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-scale, scale, (samples, n))
    y = rng.uniform(-scale, scale, (samples, n))
    th = rng.uniform(-scale, scale, (samples, p))
    th2 = rng.uniform(-scale, scale, (samples, p))

    gdiff = np.linalg.norm(spec.grad_f(x, th) - spec.grad_f(x, th2), axis=-1)
    h_viol = np.max(gdiff - spec.h * np.linalg.norm(th - th2, axis=-1))

    # secant curvature along y - x
    dx = y - x
    nrm2 = np.sum(dx * dx, axis=-1)
    curv = np.sum((spec.grad_f(y, th) - spec.grad_f(x, th)) * dx, axis=-1) / nrm2
    return {
        "h": float(h_viol),
        "alpha": float(np.max(spec.alpha - curv) - eps),
        "l_f": float(np.max(curv - spec.l_f) - eps),
    }


