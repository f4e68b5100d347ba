"""The full-horizon objective C(x; theta), its gradients and the hindsight optimum."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .core import CostSpec, FeasibleSet, InstanceError, as_trajectory, history

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10**6


class OfflineConvergenceError(RuntimeError):
    def __init__(self, message: str, last_iterate: np.ndarray, residual: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


@dataclass(frozen=True)
class OfflineSolution:
    x_star: np.ndarray
    cost: float
    iterations: int
    residual: float
    method: str


def _padded(spec: CostSpec, x: np.ndarray, x0) -> np.ndarray:
    return np.vstack([history(spec, x0), x])


def _windows(spec: CostSpec, xp: np.ndarray, T: int) -> list:
    m = spec.arity - 1
    return [xp[m - j: m - j + T] for j in range(m + 1)]


def stage_costs(spec: CostSpec, x, theta, x0) -> np.ndarray:
    """Per-stage cost f(x_t; theta_t) + d(x_t, x_{t-1}, ...) as a length-T array."""
    theta = as_trajectory(theta)
    x = as_trajectory(x, theta.shape[0])
    T = x.shape[0]
    xp = _padded(spec, x, x0)
    return np.asarray(spec.f(x, theta), float) + np.asarray(spec.d(*_windows(spec, xp, T)), float)


def total_cost(spec: CostSpec, x, theta, x0) -> float:
    """C(x; theta), including the switching cost against x_0."""
    theta = as_trajectory(theta)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != theta.shape[0]:
        raise InstanceError("decision and parameter trajectories differ in length")
    return float(np.sum(stage_costs(spec, x, theta, x0)))


def full_gradient(spec: CostSpec, x, theta, x0) -> np.ndarray:
    """Gradient of C with respect to all stage decisions, shape ``(T, n)``."""
    theta = as_trajectory(theta)
    x = as_trajectory(x, theta.shape[0])
    T = x.shape[0]
    xp = _padded(spec, x, x0)
    grad = np.array(spec.grad_f(x, theta), dtype=float)
    parts = spec.grad_d(*_windows(spec, xp, T))
    for j, gj in enumerate(parts):
        # term at stage i is differentiated w.r.t. x_{i-j}
        grad[: T - j] += gj[j:]
    return grad


def local_gradient(spec: CostSpec, around: Sequence[Optional[np.ndarray]], theta_tau,
                   tau: int, T: int) -> np.ndarray:
    """Partial gradient of C at stage ``tau`` from the neighbouring decisions only.

    ``around`` holds ``x_{tau-m}, ..., x_{tau+m}`` with ``m = arity - 1``;
    entries past the horizon are ignored and may be None.
    """
    m = spec.arity - 1
    x_tau = around[m]
    g = np.array(spec.grad_f(x_tau, theta_tau), dtype=float)
    for j in range(m + 1):
        if tau + j > T:
            break
        # switching term of stage tau+j, arguments most recent first
        window = [around[m + j - i] for i in range(m + 1)]
        g += spec.grad_d(*window)[j]
    return g


def partial_gradient(spec: CostSpec, x, theta_tau, tau: int, x0) -> np.ndarray:
    """Gradient of C with respect to x_tau (1-based stage index)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    T = x.shape[0]
    if not 1 <= tau <= T:
        raise InstanceError(f"stage {tau} outside 1..{T}")
    m = spec.arity - 1
    xp = _padded(spec, x, x0)
    # xp row for stage s is s - 1 + m
    around = [xp[tau - 1 + m + o] if tau + o <= T else None for o in range(-m, m + 1)]
    return local_gradient(spec, around, np.asarray(theta_tau, float), tau, T)


def gradient_mapping(spec: CostSpec, x, theta, x0, fset: FeasibleSet, step: float) -> np.ndarray:
    g = full_gradient(spec, x, theta, x0)
    return (x - fset.project(x - step * g)) / step


def hessian(spec: CostSpec, theta, x0, at=None, n: Optional[int] = None) -> np.ndarray:
    """Dense Hessian of C by differencing gradients.

    Exact (up to rounding) for quadratic costs, for which ``at`` is irrelevant.
    """
    theta = as_trajectory(theta)
    T = theta.shape[0]
    if n is None:
        n = np.atleast_1d(np.asarray(x0, float)).shape[-1]
    base = np.zeros((T, n)) if at is None else as_trajectory(at, T)
    N = T * n
    H = np.empty((N, N))
    step = 1.0 if spec.quadratic else 1e-5
    for i in range(N):
        e = np.zeros(N)
        e[i] = step
        gp = full_gradient(spec, base + e.reshape(T, n), theta, x0)
        if spec.quadratic:
            gm = full_gradient(spec, base, theta, x0)
            H[:, i] = (gp - gm).ravel() / step
        else:
            gm = full_gradient(spec, base - e.reshape(T, n), theta, x0)
            H[:, i] = (gp - gm).ravel() / (2 * step)
    return 0.5 * (H + H.T)


def banded_system(spec: CostSpec, theta, x0, n: int):
    """Banded Hessian (scipy ``solve_banded`` layout) and right-hand side of grad C = 0.

    Columns are recovered by probing with interleaved unit vectors, so no
    cost-specific assembly is needed.
    """
    if not spec.quadratic:
        raise InstanceError("banded solve needs a quadratic cost")
    theta = as_trajectory(theta)
    T = theta.shape[0]
    N = T * n
    bw = n * spec.arity - 1
    zero = np.zeros((T, n))
    g0 = full_gradient(spec, zero, theta, x0).ravel()
    ab = np.zeros((2 * bw + 1, N))
    stride = 2 * bw + 1
    cols = np.arange(N)
    for start in range(min(stride, N)):
        probe = np.zeros(N)
        idx = cols[start::stride]
        probe[idx] = 1.0
        hcol = full_gradient(spec, probe.reshape(T, n), theta, x0).ravel() - g0
        for j in idx:
            lo, hi = max(0, j - bw), min(N, j + bw + 1)
            ab[bw + np.arange(lo, hi) - j, j] = hcol[lo:hi]
    return ab, -g0, bw


def banded_solve(spec: CostSpec, theta, x0, n: int) -> np.ndarray:
    ab, rhs, bw = banded_system(spec, theta, x0, n)
    x = solve_banded((bw, bw), ab, rhs)
    return x.reshape(-1, n)


def offline_optimum(spec: CostSpec, theta, fset: FeasibleSet, x0, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, warm_start=None,
                    method: Optional[str] = None) -> OfflineSolution:
    """Minimize C(x; theta) over the product of feasible sets.

    Unconstrained quadratic instances use an exact banded linear solve and
    report residual 0. Everything else runs projected gradient descent with
    step 1/L until the gradient-mapping norm drops to ``tol``.
    """
    if not tol > 0:
        raise InstanceError("tolerance must be positive")
    theta = as_trajectory(theta)
    n = fset.dim
    if method is None:
        method = "banded" if (spec.quadratic and not fset.is_box) else "pgd"
    if method == "banded":
        x = banded_solve(spec, theta, x0, n)
        return OfflineSolution(x, total_cost(spec, x, theta, x0), 0, 0.0, "banded")

    T = theta.shape[0]
    step = 1.0 / spec.L
    if warm_start is None:
        x = fset.project(np.repeat(history(spec, x0)[-1:], T, axis=0))
    else:
        x = fset.project(as_trajectory(warm_start, T))
    res = np.inf
    for it in range(1, max_iter + 1):
        g = full_gradient(spec, x, theta, x0)
        x_new = fset.project(x - step * g)
        res = float(np.linalg.norm(x - x_new) / step)
        x = x_new
        if res <= tol:
            break
    else:
        raise OfflineConvergenceError(
            f"projected gradient did not reach {tol:g} in {max_iter} iterations", x, res)
    return OfflineSolution(x, total_cost(spec, x, theta, x0), it, res, "pgd")


def check_lemma1(spec: CostSpec, T: int, trials: int = 100, n: int = 1, p: Optional[int] = None,
                 seed: int = 0, scale: float = 3.0) -> dict:
    """Sample the strong convexity / smoothness sandwich for C.

    For random x, y, theta checks
    ``alpha/2 |x-y|^2 <= C(y) - C(x) - <grad C(x), y - x> <= L/2 |x-y|^2``
    and returns the largest violation of each side, plus the extreme
    secant curvatures seen.
    """
    if trials < 1:
        raise InstanceError("need at least one trial")
    p = n if p is None else p
    rng = np.random.default_rng(seed)
    low_v = up_v = -np.inf
    cmin, cmax = np.inf, -np.inf
    for _ in range(trials):
        x = rng.uniform(-scale, scale, (T, n))
        y = rng.uniform(-scale, scale, (T, n))
        th = rng.uniform(-scale, scale, (T, p))
        x0 = rng.uniform(-scale, scale, n)
        gap = (total_cost(spec, y, th, x0) - total_cost(spec, x, th, x0)
               - np.sum(full_gradient(spec, x, th, x0) * (y - x)))
        r2 = float(np.sum((x - y) ** 2))
        low_v = max(low_v, 0.5 * spec.alpha * r2 - gap)
        up_v = max(up_v, gap - 0.5 * spec.L * r2)
        cmin = min(cmin, 2 * gap / r2)
        cmax = max(cmax, 2 * gap / r2)
    return {"strong_convexity_violation": float(low_v), "smoothness_violation": float(up_v),
            "min_curvature": float(cmin), "max_curvature": float(cmax), "L": spec.L}
