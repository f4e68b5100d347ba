"""Receding horizon inexact gradient, its initialization oracles, and AFHC/CHC.

RHIG bookkeeping uses ``j = W - k``, the number of updates a stage variable
still has to receive. With stencil reach ``r`` (1 for ``d(x_t, x_{t-1})``,
2 for the three-stage switching cost), stage ``t`` updates
``x_{t + r j}`` for ``j = W-1, ..., 0`` and outputs ``x_t`` with ``j = 0``.
For ``r = 1`` this is exactly the triangular schedule ``k = t + W - tau``.
Each update reads its neighbours one layer up (``j + 1``), all of which
have been computed at or before the current stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import CostSpec, FeasibleSet, InstanceError, history
from .offline import local_gradient, offline_optimum
from .predict import PredictionTable, StageView, exact_table

Oracle = Callable[[int, np.ndarray, StageView], np.ndarray]


def epoch_length(T: int, V_T: float) -> int:
    """Restart period ceil(sqrt(2T / V_T))."""
    if V_T <= 0:
        raise InstanceError("variation hint must be positive")
    return max(1, math.ceil(math.sqrt(2.0 * T / V_T)))


@dataclass(frozen=True)
class AlgoConfig:
    W: Union[int, float] = 1
    eta: Optional[float] = None  # default 1/(2L)
    oracle: Union[str, Oracle] = "restarted-ogd"
    xi: Optional[float] = None  # constant OGD step; default 4/(alpha j)
    epoch: Optional[int] = None
    V_T_hint: Optional[float] = None
    inf_tol: float = 1e-10

    def __post_init__(self):
        if not (self.W == math.inf or (float(self.W).is_integer() and self.W >= 0)):
            raise InstanceError("W must be a nonnegative integer or inf")
        if self.eta is not None and not self.eta > 0:
            raise InstanceError("stepsize eta must be positive")
        if self.epoch is not None and self.epoch < 1:
            raise InstanceError("epoch length must be at least 1")
        if isinstance(self.oracle, str) and self.oracle not in ("hold", "restarted-ogd"):
            raise InstanceError(f"unknown oracle {self.oracle!r}")

    def stepsize(self, spec: CostSpec) -> float:
        return self.eta if self.eta is not None else 1.0 / (2.0 * spec.L)

    def epoch_for(self, T: int) -> int:
        if self.epoch is not None:
            return self.epoch
        if self.V_T_hint is not None:
            return epoch_length(T, self.V_T_hint)
        return T


@dataclass
class RunTrace:
    outputs: np.ndarray
    init: Optional[np.ndarray]
    W: Union[int, float]
    name: str = "rhig"
    iterates: Optional[np.ndarray] = None  # (W + 1, T, n), indexed by k
    consumed: list = field(default_factory=list)  # (t, tau, k, row)
    access_log: Optional[list] = None

    def to_csv(self, path, debug_path=None) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "component", "x_value"])
            for t, row in enumerate(self.outputs, start=1):
                for c, v in enumerate(row):
                    w.writerow([t, c, f"{v:.17g}"])
        if debug_path is not None and self.iterates is not None:
            with open(debug_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "k", "tau", "component", "iterate"])
                for t, tau, k, _ in self.consumed:
                    for c, v in enumerate(self.iterates[k, tau - 1]):
                        w.writerow([t, k, tau, c, f"{v:.17g}"])


class HoldOracle:
    """x_tau(0) = x_{tau-1}(0)."""

    def __call__(self, tau: int, prev: np.ndarray, view: StageView) -> np.ndarray:
        return prev.copy()


class RestartedOGD:
    """Projected OGD over the initial iterates with periodic step-size restarts.

    Within an epoch the j-th stage uses ``xi = 4 / (alpha j)`` (or a constant
    override). A restart resets ``j`` and keeps the current iterate.
    """

    def __init__(self, spec: CostSpec, fset: FeasibleSet, epoch: int, xi: Optional[float] = None):
        self.spec = spec
        self.fset = fset
        self.epoch = epoch
        self.xi = xi

    def step(self, tau: int) -> float:
        if self.xi is not None:
            return self.xi
        j = (tau - 1) % self.epoch + 1
        return 4.0 / (self.spec.alpha * j)

    def __call__(self, tau: int, prev: np.ndarray, view: StageView) -> np.ndarray:
        grad = self.spec.grad_f(prev, view.prediction(tau - 1))
        return self.fset.project(prev - self.step(tau) * grad)


def make_oracle(cfg: AlgoConfig, spec: CostSpec, fset: FeasibleSet, T: int) -> Oracle:
    if callable(cfg.oracle):
        return cfg.oracle
    if cfg.oracle == "hold":
        return HoldOracle()
    return RestartedOGD(spec, fset, cfg.epoch_for(T), cfg.xi)


def rhig_run(spec: CostSpec, fset: FeasibleSet, table: PredictionTable, cfg: AlgoConfig, x0,
             keep_iterates: bool = False, log_access: bool = False) -> RunTrace:
    """Run RHIG stage by stage and return its decisions x_t(W)."""
    T, n, r, m = table.T, fset.dim, spec.reach, spec.arity - 1
    hist = history(spec, x0)
    eta = cfg.stepsize(spec)
    W = cfg.W
    infinite = W == math.inf
    log = [] if log_access else None

    if infinite:
        # enough layers that every variable starts from the converged pre-solve
        J = math.ceil(T / r) + 1
        pre = offline_optimum(spec, table.rows[0], fset, x0, tol=cfg.inf_tol)
        X = np.repeat(pre.x_star[None], J + 1, axis=0)
        first_stage = 1
        init = None
    else:
        J = int(W)
        X = np.full((J + 1, T, n), np.nan)
        first_stage = 1 - r * J
        init = X[J]
        oracle = make_oracle(cfg, spec, fset, T)

    outputs = np.empty((T, n))
    consumed = []

    def neighbour(layer: int, stage: int):
        if stage <= 0:
            return hist[m - 1 + stage]
        if stage > T:
            return None
        return X[layer, stage - 1]

    for t in range(first_stage, T + 1):
        view = table.at_stage(t, log)
        if not infinite:
            tau0 = t + r * J
            if tau0 == 1:
                X[J, 0] = hist[-1]
            elif 2 <= tau0 <= T:
                try:
                    X[J, tau0 - 1] = oracle(tau0, X[J, tau0 - 2], view)
                except Exception as exc:  # noqa: BLE001
                    raise RuntimeError(f"initialization oracle failed at stage {t}") from exc
        for j in range(J - 1, -1, -1):
            tau = t + r * j
            if tau < 1 or tau > T:
                continue
            around = [neighbour(j + 1, tau + o) for o in range(-m, m + 1)]
            g = local_gradient(spec, around, view.prediction(tau), tau, T)
            X[j, tau - 1] = fset.project(X[j + 1, tau - 1] - eta * g)
            consumed.append((t, tau, (J - j) if not infinite else math.inf, max(t - 1, 0)))
        if t >= 1:
            outputs[t - 1] = X[0, t - 1]

    iterates = None
    if keep_iterates and not infinite:
        iterates = X[::-1].copy()
    return RunTrace(outputs, None if init is None else init.copy(), W, "rhig", iterates,
                    consumed, log)


def rhgd_run(spec: CostSpec, fset: FeasibleSet, table: PredictionTable, cfg: AlgoConfig,
             x0) -> RunTrace:
    """RHIG fed with exact lookahead, i.e. the accurate-window algorithm."""
    trace = rhig_run(spec, fset, exact_table(table.theta), cfg, x0)
    trace.name = "rhgd"
    return trace


def batch_inexact_pgd(spec: CostSpec, fset: FeasibleSet, table: PredictionTable, W: int,
                      eta: float, x_init: np.ndarray, x0) -> np.ndarray:
    """Vector form: x(k) = proj[x(k-1) - eta grad C(x(k-1); theta - delta(r(W-k)+1))].

    Returns all iterates, shape ``(W + 1, T, n)``.
    """
    from .offline import full_gradient

    r = spec.reach
    xs = [np.asarray(x_init, float)]
    for k in range(1, W + 1):
        theta_used = table.theta - table.errors(r * (W - k) + 1)
        g = full_gradient(spec, xs[-1], theta_used, x0)
        xs.append(fset.project(xs[-1] - eta * g))
    return np.array(xs)


def ogd_initialization(spec: CostSpec, fset: FeasibleSet, table: PredictionTable,
                       cfg: AlgoConfig, x0) -> np.ndarray:
    """The oracle's whole x(0) sequence, computed in one pass.

    x_tau(0) uses theta_{tau-1} - delta_{tau-1}(min(r W, T)), the prediction
    available when it is initialized.
    """
    T, r = table.T, spec.reach
    lookahead = min(r * int(cfg.W), T)
    theta_used = table.theta if lookahead == 0 else table.theta - table.errors(lookahead)
    ogd = RestartedOGD(spec, fset, cfg.epoch_for(T), cfg.xi)
    x = np.empty((T, fset.dim))
    x[0] = history(spec, x0)[-1]
    for tau in range(2, T + 1):
        x[tau - 1] = fset.project(
            x[tau - 2] - ogd.step(tau) * spec.grad_f(x[tau - 2], theta_used[tau - 2]))
    return x


def chc_run(spec: CostSpec, fset: FeasibleSet, table: PredictionTable, W: int, v: int, x0,
            tol: float = 1e-9) -> RunTrace:
    """Committed horizon control averaged over ``v`` staggered versions.

    Version ``r`` replans at stages ``s = 1 + r (mod v)`` over the window
    ``s .. s+W-1`` using predictions available at ``s``, pinned to its own
    earlier decisions, and commits the first ``v`` decisions. A version whose
    first replanning stage ``s`` is at or before 0 plans ``1 .. W`` with the
    initial predictions and keeps stages ``1 .. s+v-1`` of it. Costs past the
    window are ignored. The played decision is the average over versions.
    """
    if W < 1:
        raise InstanceError("window W must be at least 1")
    if not 1 <= v <= W:
        raise InstanceError("commitment level must satisfy 1 <= v <= W")
    T, n, m = table.T, fset.dim, spec.arity - 1
    hist = history(spec, x0)
    own = np.full((v, T, n), np.nan)
    log = []

    for rv in range(v):
        s = 1 + rv - v if rv > 0 else 1
        while s <= T:
            a = max(s, 1)
            b = min(a + W - 1, T)
            commit_end = min(s + v - 1, b)
            if commit_end >= a:
                view = table.at_stage(s, log)
                th = np.array([view.prediction(tau) for tau in range(a, b + 1)])
                past = np.vstack([hist, own[rv, : a - 1]])[-m:]
                plan = offline_optimum(spec, th, fset, past, tol=tol).x_star
                own[rv, a - 1: commit_end] = plan[: commit_end - a + 1]
            s += v
    outputs = own.mean(axis=0)
    name = "afhc" if v == W else "chc"
    return RunTrace(outputs, None, W, name, None, [], log)


def afhc_run(spec: CostSpec, fset: FeasibleSet, table: PredictionTable, W: int, x0,
             tol: float = 1e-9) -> RunTrace:
    """Averaging fixed horizon control: W staggered plans, each committing all W steps."""
    return chc_run(spec, fset, table, W, W, x0, tol)
