"""Prediction tables, correlated prediction-error models and their matrix form.

Indexing convention: ``rows[s, tau - 1]`` is the prediction of ``theta_tau``
held after stage ``s`` has been revealed, i.e. the prediction an agent reads
at the start of stage ``s + 1``. Row 0 holds the initial predictions. For
``tau <= s`` the entry is the true parameter.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import InstanceError, as_trajectory


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based stream, one per run seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass
class StageView:
    """What an agent may read at the start of stage ``t``.

    Only row ``t - 1`` of the table is reachable, and every access is logged
    as ``(t, tau, row)``.
    """

    table: "PredictionTable"
    t: int
    log: Optional[list] = None

    def prediction(self, tau: int) -> np.ndarray:
        s = max(self.t - 1, 0)
        if self.log is not None:
            self.log.append((self.t, tau, s))
        return self.table.predict(tau, s)


@dataclass(frozen=True)
class PredictionTable:
    theta: np.ndarray
    rows: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        T, p = self.theta.shape
        if self.rows.shape != (T + 1, T, p):
            raise InstanceError(f"prediction rows must have shape {(T + 1, T, p)}")
        # entries at or behind the information stage are the truth
        for s in range(1, T + 1):
            if not np.array_equal(self.rows[s, :s], self.theta[:s]):
                raise InstanceError("predictions of revealed parameters must be exact")
        self.theta.flags.writeable = False
        self.rows.flags.writeable = False

    @property
    def T(self) -> int:
        return self.theta.shape[0]

    @property
    def p(self) -> int:
        return self.theta.shape[1]

    def predict(self, tau: int, s: int) -> np.ndarray:
        """theta_{tau | s}; rows before 0 fall back to the initial predictions."""
        if not 1 <= tau <= self.T:
            raise InstanceError(f"stage {tau} outside 1..{self.T}")
        return self.rows[min(max(s, 0), self.T), tau - 1]

    def at_stage(self, t: int, log: Optional[list] = None) -> StageView:
        return StageView(self, t, log)

    def errors(self, k: int) -> np.ndarray:
        """delta_t(k) = theta_t - theta_{t|t-k} for all t, shape ``(T, p)``."""
        if k < 1:
            raise InstanceError("lookahead k must be at least 1")
        t = np.arange(1, self.T + 1)
        s = np.maximum(t - k, 0)
        return self.theta - self.rows[s, t - 1]

    def error_norms_sq(self) -> np.ndarray:
        """||delta(k)||^2 for k = 1..T."""
        return np.array([float(np.sum(self.errors(k) ** 2)) for k in range(1, self.T + 1)])

    def nondecreasing_errors(self) -> bool:
        """Whether ||delta(k)|| >= ||delta(k-1)|| held on this realization."""
        nrm = self.error_norms_sq()
        return bool(np.all(np.diff(nrm) >= -1e-12 * max(1.0, nrm.max())))

    def shifted(self, offset) -> "PredictionTable":
        """Add a deterministic, perfectly predicted signal to every entry."""
        offset = as_trajectory(offset, self.T)
        return PredictionTable(self.theta + offset, self.rows + offset[None], dict(self.meta))

    def to_csv(self, path) -> None:
        """Rows ``(t, tau, component, value)`` for theta_{tau|t-1}, tau >= t - 1."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "tau", "component", "value"])
            for t in range(1, self.T + 2):
                for tau in range(max(t - 1, 1), self.T + 1):
                    for c in range(self.p):
                        w.writerow([t, tau, c, f"{self.rows[t - 1, tau - 1, c]:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "PredictionTable":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0].astype(int)
        tau = data[:, 1].astype(int)
        comp = data[:, 2].astype(int)
        T, p = int(tau.max()), int(comp.max()) + 1
        rows = np.full((T + 1, T, p), np.nan)
        rows[t - 1, tau - 1, comp] = data[:, 3]
        theta = np.array([rows[tau, tau - 1] for tau in range(1, T + 1)])
        for s in range(1, T + 1):
            rows[s, :s] = theta[:s]
        if np.isnan(rows).any():
            raise InstanceError("prediction table CSV is incomplete")
        return cls(theta, rows)


def exact_table(theta) -> PredictionTable:
    theta = as_trajectory(theta)
    T = theta.shape[0]
    return PredictionTable(theta.copy(), np.repeat(theta[None], T + 1, axis=0))


def delta(table: PredictionTable, k: int) -> np.ndarray:
    """Stacked k-step prediction errors, a vector of length p*T."""
    return table.errors(k).ravel()


@dataclass(frozen=True)
class StochasticPredictionModel:
    """delta_t(k) = sum_{s=t-k+1}^{t} P(t-s) e_s with e_s ~ N(0, R_e) i.i.d."""

    P: np.ndarray  # (T, p, q), P[i] multiplies e_{t-i}
    R_e: np.ndarray  # (q, q)
    seed: int = 0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        R = np.atleast_2d(np.asarray(self.R_e, dtype=float))
        if P.ndim != 3:
            raise InstanceError("P must be a stack of p x q matrices")
        if R.shape != (P.shape[2], P.shape[2]):
            raise InstanceError("R_e must be q x q")
        if not np.allclose(R, R.T, atol=1e-12):
            raise InstanceError("R_e must be symmetric")
        if np.linalg.eigvalsh(R).min() < -1e-12 * max(1.0, np.abs(R).max()):
            raise InstanceError("R_e must be positive semidefinite")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "R_e", R)

    @classmethod
    def ar1(cls, gamma: float, sigma2: float, T: int, p: int = 1, seed: int = 0):
        P = np.array([gamma**i * np.eye(p) for i in range(T)])
        return cls(P, sigma2 * np.eye(p), seed)

    @property
    def T(self) -> int:
        return self.P.shape[0]

    @property
    def p(self) -> int:
        return self.P.shape[1]

    @property
    def q(self) -> int:
        return self.P.shape[2]

    def noise_factor(self) -> np.ndarray:
        """Symmetric square root of R_e (valid for singular R_e too)."""
        w, V = np.linalg.eigh(self.R_e)
        return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T

    def draw_noise(self, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        rng = make_rng(self.seed) if rng is None else rng
        z = rng.standard_normal((self.T, self.q))
        return z @ self.noise_factor()

    def error_matrix(self, k: int) -> np.ndarray:
        return error_matrix(self.P, k)


def error_matrix(P: np.ndarray, k: int) -> np.ndarray:
    """Block lower-triangular M_k with delta(k) = M_k e.

    Block (t, s) is P(t - s) when 0 <= t - s <= k - 1 and zero otherwise.
    """
    if k < 1:
        raise InstanceError("lookahead k must be at least 1")
    T, p, q = P.shape
    M = np.zeros((p * T, q * T))
    for t in range(T):
        for s in range(max(0, t - k + 1), t + 1):
            M[t * p:(t + 1) * p, s * q:(s + 1) * q] = P[t - s]
    return M


def errors_from_noise(P: np.ndarray, e: np.ndarray) -> np.ndarray:
    """cumulative[t, j] = sum_{i=0}^{j} P(i) e_{t-i}, shape (T, T, p).

    ``cumulative[t, k-1]`` is delta_t(k); indices past t repeat delta_t(t).
    """
    T = P.shape[0]
    t, i = np.meshgrid(np.arange(T), np.arange(T), indexing="ij")
    lag = np.clip(t - i, 0, None)
    contrib = np.einsum("ipq,tiq->tip", P, e[lag])
    contrib[i > t] = 0.0
    return np.cumsum(contrib, axis=1)


def table_from_errors(theta: np.ndarray, cumulative: np.ndarray) -> PredictionTable:
    """Fill theta_{tau|s} = theta_tau - delta_tau(tau - s)."""
    T, p = theta.shape
    s, tau = np.meshgrid(np.arange(T + 1), np.arange(1, T + 1), indexing="ij")
    ahead = s < tau
    rows = np.repeat(theta[None].copy(), T + 1, axis=0)
    rows[ahead] = theta[tau[ahead] - 1] - cumulative[tau[ahead] - 1, tau[ahead] - s[ahead] - 1]
    return PredictionTable(theta.copy(), rows)


def generate(model: StochasticPredictionModel, theta) -> PredictionTable:
    """Prediction table for true parameters ``theta`` under the error model."""
    theta = as_trajectory(theta)
    if theta.shape != (model.T, model.p):
        raise InstanceError(f"theta must have shape {(model.T, model.p)}")
    e = model.draw_noise()
    table = table_from_errors(theta, errors_from_noise(model.P, e))
    return PredictionTable(table.theta, table.rows, {"noise": e})


def ar1_scenario(gamma: float, theta0, sigma2: float, T: int, seed: int,
                 rng: Optional[np.random.Generator] = None):
    """theta_t = gamma theta_{t-1} + e_t with optimal predictions gamma^k theta_{t-k}.

    Returns ``(theta, table)``; the noise draw is kept in ``table.meta``.
    """
    if sigma2 < 0:
        raise InstanceError("noise variance must be nonnegative")
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    p = theta0.size
    rng = make_rng(seed) if rng is None else rng
    e = np.sqrt(sigma2) * rng.standard_normal((T, p))
    path = np.empty((T + 1, p))
    path[0] = theta0
    for t in range(1, T + 1):
        path[t] = gamma * path[t - 1] + e[t - 1]
    theta = path[1:].copy()
    rows = np.repeat(theta[None].copy(), T + 1, axis=0)
    for s in range(T):
        lags = np.arange(1, T - s + 1)
        rows[s, s:] = (gamma ** lags)[:, None] * path[s]
    return theta, PredictionTable(theta, rows, {"noise": e, "theta0": theta0, "gamma": gamma})


def spectral_norm_psd(R: np.ndarray, tol: float = 1e-10, max_iter: int = 100000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if not np.any(R):
        return 0.0
    v = np.ones(R.shape[0]) / np.sqrt(R.shape[0])
    # a fixed generic start avoids landing orthogonal to the top eigenvector
    v = v + 1e-3 * np.arange(1, R.shape[0] + 1)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = R @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def expected_error_bound(model: StochasticPredictionModel, k: int) -> float:
    """Upper bound ||R_e||_2 * sum_{t<min(k,T)} (T - t) ||P(t)||_F^2 on E||delta(k)||^2."""
    if k < 1:
        raise InstanceError("lookahead k must be at least 1")
    T = model.T
    fro2 = np.sum(model.P**2, axis=(1, 2))
    tt = np.arange(min(k, T))
    return spectral_norm_psd(model.R_e) * float(np.sum((T - tt) * fro2[tt]))


def expected_error_exact(model: StochasticPredictionModel, k: int) -> float:
    """trace(R_e^blk M_k^T M_k), the exact value of E||delta(k)||^2."""
    M = model.error_matrix(min(k, model.T))
    Rb = np.kron(np.eye(model.T), model.R_e)
    return float(np.trace(Rb @ M.T @ M))
