"""Fast property checks runnable from the command line."""

from __future__ import annotations

import math

import numpy as np

from ..algos import AlgoConfig, batch_inexact_pgd, rhig_run
from ..bounds import BoundConstants, corollary1_bound
from ..core import FeasibleSet, quadratic_tracking_cost
from ..offline import banded_solve, check_lemma1, full_gradient, hessian, offline_optimum
from ..predict import StochasticPredictionModel, expected_error_bound, expected_error_exact, generate


def _schedule(rng) -> bool:
    for _ in range(20):
        T = int(rng.integers(1, 8))
        n = int(rng.integers(1, 3))
        spec = quadratic_tracking_cost(rng.uniform(0.5, 2), rng.uniform(0, 2))
        fset = FeasibleSet.box(-1.0, 1.0, dim=n)
        model = StochasticPredictionModel.ar1(0.7, 0.3, T, n, int(rng.integers(1 << 30)))
        table = generate(model, rng.normal(size=(T, n)))
        x0 = rng.uniform(-1, 1, n)
        for W in range(T + 3):
            tr = rhig_run(spec, fset, table, AlgoConfig(W=W), x0, keep_iterates=True)
            xs = batch_inexact_pgd(spec, fset, table, W, 1 / (2 * spec.L), tr.init, x0)
            if np.max(np.abs(xs[-1] - tr.outputs)) > 1e-12:
                return False
    return True


def _lemma1(rng) -> bool:
    for _ in range(10):
        spec = quadratic_tracking_cost(rng.uniform(0.5, 3), rng.uniform(0, 3))
        T = int(rng.integers(1, 8))
        w = np.linalg.eigvalsh(hessian(spec, np.zeros((T, 1)), np.zeros(1)))
        if w.min() < spec.alpha - 1e-8 or w.max() > spec.L + 1e-8:
            return False
        if check_lemma1(spec, T, trials=20, seed=int(rng.integers(1 << 30)))[
                "smoothness_violation"] > 1e-8:
            return False
    return True


def _gradient_error(rng) -> bool:
    spec = quadratic_tracking_cost(1.3, 0.7)
    worst = -math.inf
    for _ in range(200):
        x, a, b = rng.normal(size=(3, 5, 2))
        gap = np.linalg.norm(full_gradient(spec, x, a, np.zeros(2))
                             - full_gradient(spec, x, b, np.zeros(2)))
        worst = max(worst, gap - spec.h * np.linalg.norm(a - b))
    return worst <= 1e-9


def _offline(rng) -> bool:
    spec = quadratic_tracking_cost(1.0, 0.5)
    th = rng.normal(size=(6, 1))
    pgd = offline_optimum(spec, th, FeasibleSet.whole_space(1), np.zeros(1), method="pgd")
    return np.max(np.abs(pgd.x_star - banded_solve(spec, th, np.zeros(1), 1))) <= 1e-8


def _monotone(rng) -> bool:
    c = BoundConstants.from_spec(quadratic_tracking_cost(1.0, 0.5, G=2.0))
    T = 20
    ladder = np.cumsum(rng.uniform(0, 1, T))
    p1, p2 = zip(*[corollary1_bound(c, W, T, 4.0, ladder) for W in range(1, 41)])
    return bool(np.all(np.diff(p1) < 0) and np.all(np.diff(p2) >= -1e-12))


def _error_model(rng) -> bool:
    model = StochasticPredictionModel.ar1(0.5, 1.0, 3)
    return (abs(expected_error_bound(model, 2) - 3.5) < 1e-12
            and expected_error_exact(model, 2) <= 3.5 + 1e-12)


CHECKS = {
    "schedule equivalence": _schedule,
    "hessian spectrum": _lemma1,
    "gradient error bound": _gradient_error,
    "offline oracle": _offline,
    "bound monotonicity": _monotone,
    "error model algebra": _error_model,
}


def run_selftest(seed: int = 0, echo=print) -> bool:
    rng = np.random.default_rng(seed)
    ok = True
    for name, check in CHECKS.items():
        passed = bool(check(rng))
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
