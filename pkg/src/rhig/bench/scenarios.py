"""Instance generators for the planning, quadrotor and adversarial experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import (CostSpec, FeasibleSet, InstanceError, history, linear_quadratic_cost,
                    quadratic_tracking_cost, second_difference_cost)
from ..offline import hessian
from ..predict import (PredictionTable, StochasticPredictionModel, ar1_scenario, make_rng)
from ..bounds import lowerbound_conditions

PLANNING_DEFAULTS = {
    "T": 20, "alpha": 1.0, "beta": 0.5, "x0": 10.0, "a": 4.0, "omega": 0.5,
    "sigma2": 1.0, "gamma": 0.7, "eta": 0.5, "xi": 1.0, "v": 3,
}

QUADROTOR_DEFAULTS = {
    "horizon": 10.0, "dt": 0.1, "alpha": 1.0, "beta": 1e-5, "k1": 1.0, "k2": 1.0, "g": 9.8,
    "x0": 1.0, "gamma": 0.6, "sigma2": 0.25, "t_c": 5.6, "amp_before": 0.9, "amp_after": 0.3,
    "omega": 0.2, "offset": 1.0, "xi": 1.0, "eta": None, "v": 3, "surprise": True,
}

LOWERBOUND_DEFAULTS = {"T": 20, "alpha": 2.0, "beta": 1.0, "x0": 0.0, "eta": None, "xi": None,
                       "v": 3, "gamma": 0.0}

DEFAULTS = {"planning": PLANNING_DEFAULTS, "quadrotor": QUADROTOR_DEFAULTS,
            "lowerbound": LOWERBOUND_DEFAULTS}


@dataclass(frozen=True)
class Instance:
    """One realized problem: cost, set, truth, predictions and bookkeeping."""

    spec: CostSpec
    fset: FeasibleSet
    theta: np.ndarray
    table: PredictionTable
    x0: np.ndarray
    theta0: Optional[np.ndarray] = None
    model: Optional[StochasticPredictionModel] = None
    eta: Optional[float] = None
    xi: Optional[float] = None
    v: int = 3
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def T(self) -> int:
        return self.table.T


@dataclass(frozen=True)
class Scenario:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DEFAULTS:
            raise InstanceError(f"unknown scenario {self.kind!r}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise InstanceError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        object.__setattr__(self, "params", {**DEFAULTS[self.kind], **self.params})

    def with_params(self, **overrides) -> "Scenario":
        return Scenario(self.kind, {**self.params, **overrides})

    def build(self, seed: int) -> Instance:
        p = self.params
        if self.kind == "planning":
            return scenario_planning(p["gamma"], p["T"], p["alpha"], p["beta"], p["x0"], p["a"],
                                     p["omega"], p["sigma2"], seed, eta=p["eta"], xi=p["xi"],
                                     v=p["v"])
        if self.kind == "quadrotor":
            return scenario_quadrotor(p, seed)
        return scenario_lowerbound(p["alpha"], p["beta"], p["T"], seed, x0=p["x0"],
                                   eta=p["eta"], xi=p["xi"], v=p["v"])


def scenario_planning(gamma: float, T: int = 20, alpha: float = 1.0, beta: float = 0.5,
                      x0: float = 10.0, a: float = 4.0, omega: float = 0.5, sigma2: float = 1.0,
                      seed: int = 0, eta: Optional[float] = 0.5, xi: Optional[float] = 1.0,
                      v: int = 3) -> Instance:
    """theta_t = y_t + a sin(omega t), y an AR(1) path from y_0 = 0.

    The sinusoid is known; y is predicted by gamma^k y_{t-k}.
    """
    if T < 1 or sigma2 < 0:
        raise InstanceError("need T >= 1 and sigma2 >= 0")
    spec = quadratic_tracking_cost(alpha, beta)
    d = a * np.sin(omega * np.arange(1, T + 1))
    _, base = ar1_scenario(gamma, 0.0, sigma2, int(T), seed)
    table = base.shifted(d)
    model = StochasticPredictionModel.ar1(gamma, sigma2, int(T), 1, seed)
    theta0 = np.zeros(1)  # y_0 = 0 and sin(0) = 0
    return Instance(spec, FeasibleSet.whole_space(1), table.theta, table, np.array([float(x0)]),
                    theta0, model, eta, xi, int(v), {"d": d})


def quadrotor_target(p: dict, T: int, shock: bool = True) -> np.ndarray:
    """Reference altitude per stage; stage t sits at time t * dt."""
    t = np.arange(1, T + 1) * p["dt"]
    before = p["amp_before"] * np.sin(p["omega"] * t) + p["offset"]
    if not shock:
        return before
    after = p["amp_after"] * np.sin(p["omega"] * t) + p["offset"]
    return np.where(np.arange(1, T + 1) <= shock_stage(p), before, after)


def shock_stage(p: dict) -> int:
    # round first so 5.6 / 0.1 does not become 56.000000000000007
    return math.ceil(round(p["t_c"] / p["dt"], 9))


def scenario_quadrotor(params: Optional[dict] = None, seed: int = 0) -> Instance:
    """Altitude tracking with a thrust penalty and an unannounced change in the reference.

    Predictions read at stages before the shock stage still use the old
    reference for every future stage; from the shock stage on they use the
    new one. With ``surprise=False`` the change is known from the start,
    which gives the no-shock counterpart on the same noise.
    """
    p = {**QUADROTOR_DEFAULTS, **(params or {})}
    if p["dt"] <= 0:
        raise InstanceError("time step must be positive")
    T = int(round(p["horizon"] / p["dt"]))
    if T < 1:
        raise InstanceError("horizon shorter than one time step")
    spec = second_difference_cost(p["alpha"], p["beta"], p["k1"], p["k2"], p["g"], p["dt"])
    x0 = np.array([float(p["x0"])])
    # the declared l_d bound is loose; the exact Hessian gives the real L
    H = hessian(spec, np.zeros((T, 1)), x0)
    spec = spec.with_L(float(np.linalg.eigvalsh(H).max()))

    _, noise = ar1_scenario(p["gamma"], 0.0, p["sigma2"], T, seed)
    new = quadrotor_target(p, T, shock=True)
    old = quadrotor_target(p, T, shock=False)
    tc = shock_stage(p)
    rows = noise.rows + new[None, :, None]
    if p["surprise"]:
        # row s is read at stage s + 1
        for s in range(min(tc - 1, T + 1)):
            rows[s, s:] = noise.rows[s, s:] + old[s:, None]
    table = PredictionTable(noise.theta + new[:, None], rows, dict(noise.meta))
    thrust = spec.meta["thrust"]

    def control(x: np.ndarray) -> np.ndarray:
        xp = np.vstack([history(spec, x0), np.asarray(x, float).reshape(T, 1)])
        return thrust(xp[2:], xp[1:-1], xp[:-2])

    model = StochasticPredictionModel.ar1(p["gamma"], p["sigma2"], T, 1, seed)
    eta = p["eta"] if p["eta"] is not None else 1.0 / spec.L
    return Instance(spec, FeasibleSet.whole_space(1), table.theta, table, x0,
                    np.array([p["offset"]]), model, eta, p["xi"], int(p["v"]),
                    {"control": control, "shock_stage": tc, "target": new})


def scenario_lowerbound(alpha: float = 2.0, beta: float = 1.0, T: int = 20, seed: int = 0,
                        x0: float = 0.0, eta: Optional[float] = None, xi: Optional[float] = None,
                        v: int = 3) -> Instance:
    """The alternating-mean instance on [-1/2, 1/2] whose noise is revealed one piece per stage.

    theta_t = mu_t + sum_{i<=t} e_i^t with mu_t = (-1)^t / 4 and
    e_i^t uniform on [-1/(8t), 1/(8t)]. After stage s the first s pieces of
    every future theta_t are known.
    """
    if not lowerbound_conditions(alpha, beta):
        raise InstanceError("construction needs alpha > 1 and beta/alpha < 4 + 3 sqrt(2)")
    T = int(T)
    rng = make_rng(seed)
    t = np.arange(1, T + 1)
    mu = np.where(t % 2 == 0, 0.25, -0.25)
    pieces = np.zeros((T, T))  # pieces[t-1, i-1] = e_i^t for i <= t
    for k in range(T):
        w = 1.0 / (8.0 * (k + 1))
        pieces[k, : k + 1] = rng.uniform(-w, w, k + 1)
    partial = np.cumsum(pieces, axis=1)
    theta = (mu + partial[:, -1])[:, None]
    rows = np.empty((T + 1, T, 1))
    for s in range(T + 1):
        known = np.zeros(T) if s == 0 else partial[:, s - 1]
        rows[s, :, 0] = mu + known
        rows[s, :s, 0] = theta[:s, 0]
    spec = linear_quadratic_cost(alpha, beta)
    table = PredictionTable(theta, rows, {"pieces": pieces})
    return Instance(spec, FeasibleSet.box(-0.5, 0.5), theta, table, np.array([float(x0)]),
                    np.array([0.25]), None, eta, xi, int(v), {"mu": mu})
