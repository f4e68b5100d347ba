"""Closed-form regret bounds, environment variation, and related constants."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import CostSpec, FeasibleSet, InstanceError, as_trajectory
from .predict import StochasticPredictionModel, error_matrix, spectral_norm_psd

Horizon = Union[int, float]


def _pow(rho: float, W: Horizon) -> float:
    return 0.0 if W == math.inf else rho**W


@dataclass(frozen=True)
class BoundConstants:
    alpha: float
    L: float
    h: float
    G: float = math.inf
    beta: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.L >= self.alpha):
            raise InstanceError("need 0 < alpha <= L")

    @classmethod
    def from_spec(cls, spec: CostSpec) -> "BoundConstants":
        return cls(spec.alpha, spec.L, spec.h, spec.G, spec.beta)

    @property
    def rho(self) -> float:
        return 1.0 - self.alpha / (4.0 * self.L)

    @property
    def zeta(self) -> float:
        return self.h**2 / self.alpha + self.h**2 / (2.0 * self.L)

    @property
    def C1(self) -> float:
        a, G, b = self.alpha, self.G, self.beta
        return 4 * math.sqrt(2) * G**2 / a + 32 * math.sqrt(2) * b * G**2 / a**2 + 20

    @property
    def C2(self) -> float:
        return 2 * self.L * self.C1 / self.alpha

    @property
    def rho0(self) -> float:
        sL, sa = math.sqrt(self.L), math.sqrt(self.alpha)
        return ((sL - sa) / (sL + sa)) ** 2

    @property
    def c2(self) -> float:
        # coefficient lower bound on the inverse-Hessian entries in the construction
        return (self.alpha / (self.alpha + self.beta)) ** 2 * (1 - math.sqrt(self.rho0)) ** 2

    @property
    def zeta0(self) -> float:
        r0 = self.rho0
        return (self.h * (1 - math.sqrt(r0)) / (self.alpha + self.beta)) ** 2 \
            * self.alpha * (1 - 2 * r0) / 2

    @property
    def lead(self) -> float:
        """2L / alpha, the factor in front of the oracle regret."""
        return 2 * self.L / self.alpha


def _errors(delta_sq: Sequence[float]) -> np.ndarray:
    arr = np.asarray(delta_sq, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InstanceError("need ||delta(k)||^2 for k = 1..T")
    if np.any(arr < 0):
        raise InstanceError("squared norms must be nonnegative")
    return arr


def variation_VT(spec: CostSpec, theta, theta0=None, fset: Optional[FeasibleSet] = None,
                 resolution: float = 1e-3) -> float:
    """V_T = sum_t sup_x |f(x; theta_t) - f(x; theta_{t-1})|.

    ``theta0`` defaults to ``theta_1``. Costs with a closed form use it;
    otherwise a grid of the given resolution over the box is searched
    (at most three dimensions).
    """
    theta = as_trajectory(theta)
    theta0 = theta[0] if theta0 is None else np.atleast_1d(np.asarray(theta0, float))
    prev = np.vstack([theta0[None], theta[:-1]])
    if fset is None:
        raise InstanceError("variation needs a feasible set")
    if spec.sup_diff is not None:
        return float(sum(spec.sup_diff(a, b, fset) for a, b in zip(theta, prev)))
    if not fset.is_box:
        raise InstanceError("variation of a custom cost needs a box to search")
    if fset.dim > 3:
        raise InstanceError("grid search is limited to three dimensions")
    axes = [np.arange(lo, hi + 0.5 * resolution, resolution)
            for lo, hi in zip(fset.lower, fset.upper)]
    grid = np.array(list(itertools.product(*axes)))
    return float(sum(np.max(np.abs(spec.f(grid, a) - spec.f(grid, b)))
                     for a, b in zip(theta, prev)))


def theorem1_bound(c: BoundConstants, W: Horizon, reg_phi: float, delta_sq) -> float:
    """General bound: oracle term, weighted prediction errors, and the W > T tail."""
    e = _errors(delta_sq)
    T = e.size
    K = int(min(W, T))
    rho = c.rho
    val = c.lead * _pow(rho, W) * reg_phi
    val += c.zeta * float(np.sum(rho ** np.arange(K) * e[:K]))
    if W > T:
        val += (rho**T - _pow(rho, W)) / (1 - rho) * c.zeta * e[T - 1]
    return float(val)


def corollary1_bound(c: BoundConstants, W: Horizon, T: int, V_T: float, delta_sq):
    """Restarted-OGD bound split into (variation part, prediction-error part)."""
    e = _errors(delta_sq)
    if not 1 <= V_T <= T:
        warnings.warn("V_T outside [1, T]; the bound's normalization assumption fails",
                      stacklevel=2)
    rW = _pow(c.rho, W)
    part1 = rW * c.lead * c.C1 * math.sqrt(V_T * T) * math.log(1 + math.sqrt(T / V_T))
    K = int(min(W, T))
    part2 = 0.0
    if K >= 1:
        part2 += c.lead * c.h**2 / c.alpha * rW * e[K - 1]
    part2 += theorem1_bound(c, W, 0.0, e)
    return float(part1), float(part2)


def corollary2_threshold(c: BoundConstants) -> float:
    """Coefficient on ||delta(T)||^2 in the 'variation dominates' condition."""
    return (2 * c.L * c.h**2 * c.rho + c.alpha**2 * c.zeta) / (2 * c.L * c.C1 * (1 - c.rho) * c.alpha)


def corollary2_bound(c: BoundConstants, delta_sq, V_T: Optional[float] = None,
                     T: Optional[int] = None):
    """Bound for W -> inf and whether its precondition on V_T holds.

    Returns ``(value, condition)``; ``condition`` is None when V_T is not given.
    """
    e = _errors(delta_sq)
    value = c.zeta / (1 - c.rho) * float(np.sum(c.rho ** np.arange(e.size) * e))
    cond = None
    if V_T is not None:
        T = e.size if T is None else T
        lhs = math.sqrt(V_T * T) * math.log(1 + math.sqrt(T / V_T))
        cond = bool(lhs >= corollary2_threshold(c) * e[-1])
    return float(value), cond


def lowerbound_conditions(alpha: float, beta: float) -> bool:
    return alpha > 1 and beta / alpha < 4 + 3 * math.sqrt(2)


def theorem3_lower(c: BoundConstants, delta_sq) -> float:
    """zeta0 / (1 - rho0) * sum_k rho0^{k-1} ||delta(k)||^2."""
    e = _errors(delta_sq)
    r0 = c.rho0
    return float(c.zeta0 / (1 - r0) * np.sum(r0 ** np.arange(e.size) * e))


def _correlation_terms(model: StochasticPredictionModel, W: Horizon, T: int) -> tuple:
    if model.T < T:
        raise InstanceError("model has fewer coefficient matrices than stages")
    K = int(min(W, T))
    t = np.arange(K)
    fro2 = np.sum(model.P[:K] ** 2, axis=(1, 2))
    return t, spectral_norm_psd(model.R_e) * (T - t) * fro2


def theorem5_bound(c: BoundConstants, W: Horizon, T: int, model: StochasticPredictionModel,
                   exp_reg_phi: float) -> float:
    """Expected regret bound under the correlated error model."""
    t, w = _correlation_terms(model, W, T)
    rho, rW = c.rho, _pow(c.rho, W)
    return float(c.lead * rW * exp_reg_phi
                 + c.zeta * np.sum(w * (rho**t - rW) / (1 - rho)))


def corollary3_bound(c: BoundConstants, W: Horizon, T: int, model: StochasticPredictionModel,
                     exp_VT: float) -> float:
    """Expected regret bound with the restarted OGD oracle."""
    t, w = _correlation_terms(model, W, T)
    rho = c.rho
    head = _pow(rho, W) * c.C2 * math.sqrt(exp_VT * T) * math.log(1 + math.sqrt(T / exp_VT))
    return float(head + c.zeta * np.sum(w * rho**t / (1 - rho)))


def theorem6_K(c: BoundConstants, W: Horizon, T: int, model: StochasticPredictionModel) -> float:
    """Scale K of the concentration tail exp(-c min(b^2/K^2, b/K))."""
    t, w = _correlation_terms(model, W, T)
    return float(c.zeta * np.sum(w * c.rho**t / (1 - c.rho)))


def theorem6_matrix(c: BoundConstants, W: Horizon, T: int,
                    model: StochasticPredictionModel) -> np.ndarray:
    """The quadratic form A_W with bound-part = const + u^T A_W u, u standard normal."""
    P = model.P[:T]
    w, V = np.linalg.eigh(model.R_e)
    root = (V * np.sqrt(np.clip(w, 0, None))) @ V.T
    Rh = np.kron(np.eye(T), root)
    q = model.q
    A = np.zeros((q * T, q * T))
    if W == 0:
        return A
    rho = c.rho
    rW = _pow(rho, W)
    coef_head = c.lead * c.h**2 / c.alpha * rW

    def gram(k):
        M = error_matrix(P, k) @ Rh
        return M.T @ M

    if W <= T:
        A += coef_head * gram(int(W))
        for k in range(1, int(W) + 1):
            A += c.zeta * rho ** (k - 1) * gram(k)
    else:
        A += (coef_head + c.zeta * (rho**T - rW) / (1 - rho)) * gram(T)
        for k in range(1, T + 1):
            A += c.zeta * rho ** (k - 1) * gram(k)
    return A
