"""Monte Carlo harness: run algorithms on shared instances and report regret."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from ..algos import AlgoConfig, chc_run, rhgd_run, rhig_run
from ..bounds import BoundConstants, theorem1_bound, theorem5_bound
from ..core import InstanceError
from ..offline import OfflineConvergenceError, offline_optimum, stage_costs, total_cost
from .scenarios import Instance, Scenario

ALGORITHMS = ("rhig", "rhgd", "afhc", "chc", "ogd")

CSV_COLUMNS = ["scenario", "algorithm", "W", "extra_param", "seed", "realized_cost",
               "offline_cost", "regret", "bound_theorem1", "bound_theorem5", "wall_ms"]


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class AlgoSpec:
    name: str
    W: Union[int, float] = 1
    v: Optional[int] = None  # CHC commitment level
    eta: Optional[float] = None  # overrides the scenario default
    oracle: str = "restarted-ogd"

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise InstanceError(f"unknown algorithm {self.name!r}")

    @property
    def extra(self) -> str:
        return "" if self.v is None else f"v={self.v}"


@dataclass
class RegretReport:
    scenario: str
    algorithm: str
    W: Union[int, float]
    extra_param: str
    seed: int
    realized_cost: float
    offline_cost: float
    regret: float
    bound_theorem1: float = math.nan
    bound_theorem5: float = math.nan
    wall_ms: float = 0.0
    error: Optional[str] = None
    outputs: Optional[np.ndarray] = field(default=None, repr=False)
    stage_costs: Optional[np.ndarray] = field(default=None, repr=False)
    reg_phi: float = math.nan

    def row(self) -> list:
        def fmt(v):
            return f"{v:.17g}" if isinstance(v, float) else str(v)

        W = "inf" if self.W == math.inf else str(int(self.W))
        return [self.scenario, self.algorithm, W, self.extra_param, str(self.seed),
                fmt(self.realized_cost), fmt(self.offline_cost), fmt(self.regret),
                fmt(self.bound_theorem1), fmt(self.bound_theorem5), fmt(self.wall_ms)]


def algo_config(algo: AlgoSpec, inst: Instance) -> AlgoConfig:
    W = 0 if algo.name == "ogd" else algo.W
    eta = algo.eta if algo.eta is not None else inst.eta
    return AlgoConfig(W=W, eta=eta, oracle=algo.oracle, xi=inst.xi)


def execute(algo: AlgoSpec, inst: Instance):
    """Run one algorithm; returns (outputs, oracle initial sequence or None)."""
    if algo.name in ("rhig", "ogd"):
        tr = rhig_run(inst.spec, inst.fset, inst.table, algo_config(algo, inst), inst.x0)
        return tr.outputs, tr.init
    if algo.name == "rhgd":
        tr = rhgd_run(inst.spec, inst.fset, inst.table, algo_config(algo, inst), inst.x0)
        return tr.outputs, tr.init
    W = int(algo.W)
    v = W if algo.name == "afhc" else (algo.v if algo.v is not None else min(inst.v, W))
    return chc_run(inst.spec, inst.fset, inst.table, W, v, inst.x0).outputs, None


def annotate(inst: Instance, algo: AlgoSpec, reg_phi: float, delta_sq=None) -> tuple:
    """Theorem 1 and Theorem 5 values for an RHIG-family row, NaN otherwise."""
    if algo.name not in ("rhig", "ogd", "rhgd"):
        return math.nan, math.nan
    c = BoundConstants.from_spec(inst.spec)
    W = 0 if algo.name == "ogd" else algo.W
    if delta_sq is None:
        delta_sq = (np.zeros(inst.T) if algo.name == "rhgd" else inst.table.error_norms_sq())
    reg = 0.0 if W == math.inf else reg_phi
    b1 = theorem1_bound(c, W, reg, delta_sq)
    b5 = math.nan
    if inst.model is not None and algo.name != "rhgd":
        b5 = theorem5_bound(c, W, inst.T, inst.model, reg)
    return b1, b5


def run_seed(scenario: Scenario, algorithms: Sequence[AlgoSpec], seed: int,
             keep_outputs: bool = False) -> list:
    """All algorithms on one realized instance; failures become tagged rows."""
    inst = scenario.build(seed)
    opt = offline_optimum(inst.spec, inst.theta, inst.fset, inst.x0)
    reports = []
    for algo in algorithms:
        start = time.perf_counter()
        try:
            x, init = execute(algo, inst)
            if not np.all(np.isfinite(x)):
                raise NumericalFailure("non-finite decisions")
            cost = total_cost(inst.spec, x, inst.theta, inst.x0)
            reg_phi = math.nan
            if init is not None:
                reg_phi = total_cost(inst.spec, init, inst.theta, inst.x0) - opt.cost
            elif algo.W == math.inf:
                reg_phi = 0.0
            b1, b5 = annotate(inst, algo, reg_phi)
            rep = RegretReport(scenario.kind, algo.name, algo.W, algo.extra, seed, cost, opt.cost,
                               cost - opt.cost, b1, b5, reg_phi=reg_phi)
            if keep_outputs:
                rep.outputs = x
                rep.stage_costs = stage_costs(inst.spec, x, inst.theta, inst.x0)
        except (InstanceError, NumericalFailure, OfflineConvergenceError, RuntimeError,
                FloatingPointError, np.linalg.LinAlgError) as exc:
            rep = RegretReport(scenario.kind, algo.name, algo.W, algo.extra, seed, math.nan,
                               opt.cost, math.nan, error=f"{type(exc).__name__}: {exc}")
        rep.wall_ms = (time.perf_counter() - start) * 1e3
        reports.append(rep)
    return reports


def _seed_job(args):
    return run_seed(*args)


def run_experiment(scenario: Scenario, algorithms: Sequence[AlgoSpec], n_seeds: int,
                   base_seed: int = 0, parallelism: int = 1,
                   keep_outputs: bool = False) -> list:
    """Reports for seeds base_seed .. base_seed + n_seeds - 1, sorted by (algorithm, W, seed)."""
    if n_seeds < 1:
        raise InstanceError("need at least one seed")
    jobs = [(scenario, list(algorithms), base_seed + i, keep_outputs) for i in range(n_seeds)]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            batches = list(pool.map(_seed_job, jobs))
    else:
        batches = [_seed_job(j) for j in jobs]
    reports = [r for b in batches for r in b]
    order = {name: i for i, name in enumerate(ALGORITHMS)}
    reports.sort(key=lambda r: (order[r.algorithm], r.W, r.extra_param, r.seed))
    return reports


def write_csv(reports: Sequence[RegretReport], path, with_timing: bool = True) -> None:
    """Emit the report table; ``with_timing=False`` zeroes wall_ms for byte-stable files."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in reports:
            row = r.row()
            if not with_timing:
                row[-1] = "0"
            w.writerow(row)


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(CSV_COLUMNS) - set(rows[0]):
        raise InstanceError("run CSV is missing required columns")
    return rows


def summarize(reports: Sequence[RegretReport]) -> dict:
    """Mean regret and its standard error per (algorithm, W, extra)."""
    groups: dict = {}
    for r in reports:
        if r.error is None:
            groups.setdefault((r.algorithm, r.W, r.extra_param), []).append(r.regret)
    out = {}
    for key, vals in groups.items():
        a = np.asarray(vals)
        se = a.std(ddof=1) / math.sqrt(a.size) if a.size > 1 else math.nan
        out[key] = (float(a.mean()), float(se), a.size)
    return out
