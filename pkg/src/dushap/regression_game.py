"""The linear-regression data-sharing game.

Each player holds ``n_i`` rows ``x ~ N(0, Sigma)`` with ``y = x'theta + eta``.
A coalition's utility is minus the expected squared prediction error of the
pooled least-squares fit. For Gaussian features and a matched test
distribution that error has the closed form ``sigma^2 Tr[C Sigma^-1] /
(n - d - 1)``; :func:`empirical_utility_oracle` checks it by simulation.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .estimators import substream
from .game_core import (CardinalUtility, GameSpec, SetUtility, cardinal_to_set_utility,
                        normalize_utility)

SINGULAR_CONDITION = 1e12


class SingularDesignError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class RegressionGameParams:
    d: int
    sigma_eps: float = 1.0
    trace_term: Optional[float] = None
    floor_n: Optional[float] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.sigma_eps <= 0:
            raise ValueError("sigma_eps must be positive")
        if self.trace_term is None:
            object.__setattr__(self, "trace_term", float(self.d))
        if self.floor_n is None:
            object.__setattr__(self, "floor_n", float(self.d + 2))
        if self.trace_term <= 0:
            raise ValueError("trace_term must be positive")
        if self.floor_n <= self.d + 1:
            raise ValueError("floor_n must exceed d + 1")


def closed_form_value(params: RegressionGameParams, n: float) -> float:
    """``-sigma^2 Tr / (max(n, floor_n) - d - 1)``; constant below the floor."""
    m = max(n, params.floor_n)
    return -params.sigma_eps**2 * params.trace_term / (m - params.d - 1)


def closed_form_utility(params: RegressionGameParams) -> CardinalUtility:
    return CardinalUtility(lambda n: closed_form_value(params, n),
                           f"regression[d={params.d},sigma={params.sigma_eps:g}]")


def closed_form_second_derivative(params: RegressionGameParams, n: float) -> float:
    """Analytic ``w''`` above the floor."""
    return -2.0 * params.sigma_eps**2 * params.trace_term / (n - params.d - 1) ** 3


@dataclass(frozen=True)
class SyntheticRegressionData:
    X: np.ndarray
    Y: np.ndarray
    theta: np.ndarray
    Sigma: np.ndarray


def _cholesky(Sigma: np.ndarray) -> np.ndarray:
    Sigma = np.asarray(Sigma, dtype=np.float64)
    if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1] or not np.allclose(Sigma, Sigma.T):
        raise ValueError("Sigma must be a symmetric square matrix")
    try:
        return np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Sigma is not positive definite") from exc


def generate_data(n: int, Sigma: np.ndarray, theta: np.ndarray, sigma_eps: float,
                  rng: np.random.Generator) -> SyntheticRegressionData:
    L = _cholesky(Sigma)
    theta = np.asarray(theta, dtype=np.float64)
    X = rng.standard_normal((n, len(theta))) @ L.T
    Y = X @ theta + sigma_eps * rng.standard_normal(n)
    return SyntheticRegressionData(X, Y, theta, np.asarray(Sigma, dtype=np.float64))


def solve_normal_equations(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Least squares through a Cholesky factorisation of ``X'X``."""
    gram = X.T @ X
    if np.linalg.cond(gram) > SINGULAR_CONDITION:
        raise SingularDesignError("X'X is numerically singular")
    return linalg.cho_solve(linalg.cho_factor(gram), X.T @ Y)


def empirical_utility_oracle(params: RegressionGameParams, Sigma: np.ndarray, theta: np.ndarray,
                             n: int, mc_reps: int = 2000, test_samples: int = 2000,
                             seed: int = 0) -> float:
    """Simulated ``-E[(x'theta_hat - x'theta)^2]`` at pooled size ``n``.

    Every repetition draws a fresh training set and a fresh test sample from
    its own substream; singular designs are redrawn, at most ``10 * mc_reps``
    times in total.
    """
    if n < params.d + 2:
        raise ValueError(f"the oracle needs n >= d + 2 = {params.d + 2}")
    theta = np.asarray(theta, dtype=np.float64)
    if len(theta) != params.d:
        raise ValueError("theta has the wrong dimension")
    L = _cholesky(Sigma)
    errors = np.empty(mc_reps)
    redraws = 0
    for r in range(mc_reps):
        attempt = 0
        while True:
            rng = substream(seed, r, attempt)
            data = generate_data(n, Sigma, theta, params.sigma_eps, rng)
            try:
                theta_hat = solve_normal_equations(data.X, data.Y)
                break
            except SingularDesignError:
                redraws += 1
                attempt += 1
                if redraws > 10 * mc_reps:
                    raise
        x_test = rng.standard_normal((test_samples, params.d)) @ L.T
        errors[r] = np.mean((x_test @ (theta_hat - theta)) ** 2)
    return -float(np.mean(errors))


def fit_weighted_ridge(datasets: Sequence[tuple[np.ndarray, np.ndarray]], alphas: Sequence[float],
                       lam: float = 0.0) -> np.ndarray:
    """Minimiser of ``lam/2 |theta|^2 + sum_i alpha_i/n_i |Y_i - X_i theta|^2``.

    Each block is scaled by ``sqrt(alpha_i / n_i)`` and stacked; ``lam = 0``
    falls back to the pseudo-inverse solution and refuses singular designs.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    if len(alphas) != len(datasets):
        raise ValueError("one weight per dataset is required")
    if np.any((alphas < 0) | (alphas > 1)) or not np.isclose(alphas.sum(), 1.0):
        raise ValueError("weights must lie in [0, 1] and sum to 1")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    blocks_x, blocks_y = [], []
    for (X, Y), a in zip(datasets, alphas):
        X = np.asarray(X, dtype=np.float64)
        scale = np.sqrt(a / len(X))
        blocks_x.append(scale * X)
        blocks_y.append(scale * np.asarray(Y, dtype=np.float64))
    X = np.vstack(blocks_x)
    Y = np.concatenate(blocks_y)
    d = X.shape[1]
    if lam > 0:
        return np.linalg.solve(lam * np.eye(d) + X.T @ X, X.T @ Y)
    if np.linalg.cond(X.T @ X) > SINGULAR_CONDITION:
        raise SingularDesignError("weighted Gram matrix is singular; use lam > 0")
    return np.linalg.pinv(X) @ Y


class Mode(enum.Enum):
    CLOSED_FORM = "closed"
    EMPIRICAL = "empirical"


class _EmpiricalRegressionUtility:
    """Pooled least squares on fixed per-player datasets, scored on a fixed test set."""

    def __init__(self, params, Sigma, theta, g: GameSpec, seed: int, test_samples: int):
        theta = np.asarray(theta, dtype=np.float64)
        self.theta = theta
        self.players = [generate_data(n, Sigma, theta, params.sigma_eps, substream(seed, 0, i))
                        for i, n in enumerate(g.sizes)]
        L = _cholesky(Sigma)
        self.x_test = substream(seed, 1).standard_normal((test_samples, len(theta))) @ L.T
        self._cache: dict[int, float] = {}
        self._lock = threading.Lock()

    def __call__(self, mask: int) -> float:
        with self._lock:
            if mask in self._cache:
                return self._cache[mask]
        members = [p for i, p in enumerate(self.players) if mask >> i & 1]
        if members and sum(len(p.X) for p in members):
            X = np.vstack([p.X for p in members])
            Y = np.concatenate([p.Y for p in members])
            # minimum-norm solution when the pooled design is rank deficient
            theta_hat = np.linalg.lstsq(X, Y, rcond=None)[0]
        else:
            theta_hat = np.zeros_like(self.theta)
        value = -float(np.mean((self.x_test @ (theta_hat - self.theta)) ** 2))
        with self._lock:
            self._cache[mask] = value
        return value


def make_regression_set_utility(params: RegressionGameParams, Sigma: np.ndarray,
                                theta: np.ndarray, g: GameSpec,
                                mode: Union[Mode, str] = Mode.CLOSED_FORM, seed: int = 0,
                                test_samples: int = 2000) -> SetUtility:
    mode = Mode(mode)
    if mode is Mode.CLOSED_FORM:
        return normalize_utility(cardinal_to_set_utility(closed_form_utility(params), g))
    fn = _EmpiricalRegressionUtility(params, Sigma, theta, g, seed, test_samples)
    return normalize_utility(SetUtility(fn, g.n_players, "regression-empirical"))


def parse_sigma(spec: str, d: int) -> np.ndarray:
    """``"identity"``, ``"scaled:2.0"`` or a whitespace-separated ``d x d`` file."""
    if spec == "identity":
        return np.eye(d)
    if spec.startswith("scaled:"):
        return float(spec.split(":", 1)[1]) * np.eye(d)
    Sigma = np.loadtxt(Path(spec), ndmin=2)
    if Sigma.shape != (d, d):
        raise ValueError(f"Sigma file has shape {Sigma.shape}, expected {(d, d)}")
    return Sigma


def parse_theta(spec: str, d: int) -> np.ndarray:
    """``"ones"``, ``"standard-normal:SEED"`` or a file of ``d`` values."""
    if spec == "ones":
        return np.ones(d)
    if spec.startswith("standard-normal:"):
        return substream(int(spec.split(":", 1)[1])).standard_normal(d)
    theta = np.loadtxt(Path(spec), ndmin=1)
    if theta.shape != (d,):
        raise ValueError(f"theta file has {theta.size} values, expected {d}")
    return theta
