"""Error analysis for DU-Shapley and fixed-budget Monte Carlo.

``du_bias_bound`` evaluates the DU approximation-error bound for one
player; ``mc_error_at_budget`` the Hoeffding error of permutation MC at a
budget of ``I`` samples. The curvature constant ``rho`` is not known in
closed form for general ``w`` and is estimated on a grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .game_core import CardinalUtility, GameSpec


@dataclass(frozen=True)
class SizeStats:
    mu_minus_i: float
    sigma2_minus_i: float
    R_minus_i: float
    n_max_minus_i: int
    n_excl_i: int


def size_stats(g: GameSpec, i: int) -> SizeStats:
    """Moments of the other players' sizes, computed in exact rationals."""
    n = g.n_players
    if n < 2:
        raise ValueError("size statistics need I >= 2")
    if not 0 <= i < n:
        raise IndexError(f"player {i} out of range")
    others = [s for j, s in enumerate(g.sizes) if j != i]
    total = sum(others)
    mu = Fraction(total, n - 1)
    sigma2 = sum((Fraction(s) - mu) ** 2 for s in others) / (n - 1)
    R = max(abs(Fraction(s) - mu) for s in others)
    return SizeStats(float(mu), float(sigma2), float(R), max(others), total)


def size_stats_all(sizes: Sequence[int]) -> dict[str, np.ndarray]:
    """Vectorised :func:`size_stats` for every player at once (floats)."""
    s = np.asarray(sizes, dtype=np.float64)
    n = len(s)
    if n < 2:
        raise ValueError("size statistics need I >= 2")
    excl = s.sum() - s
    mu = excl / (n - 1)
    sq = (s**2).sum() - s**2
    sigma2 = np.maximum(sq / (n - 1) - mu**2, 0.0)
    order = np.argsort(s, kind="stable")
    lo1, lo2 = s[order[0]], s[order[1]]
    hi1, hi2 = s[order[-1]], s[order[-2]]
    idx = np.arange(n)
    min_other = np.where(idx == order[0], lo2, lo1)
    max_other = np.where(idx == order[-1], hi2, hi1)
    R = np.maximum(np.abs(max_other - mu), np.abs(mu - min_other))
    return {"mu": mu, "sigma2": sigma2, "R": R, "n_max": max_other, "n_excl": excl}


def second_difference(w: CardinalUtility, n: float) -> float:
    """Central finite-difference ``w''(n)`` with step ``max(1e-3 n, 1e-3)``."""
    h = min(max(1e-3 * n, 1e-3), n)
    return (w(n + h) - 2.0 * w(n) + w(n - h)) / (h * h)


def estimate_rho(w: CardinalUtility, n_grid: Sequence[float]) -> float:
    """``max n^2 |w''(n)| / |w(n)|`` over the grid; zeros of ``w`` are skipped."""
    best = None
    for n in n_grid:
        if n <= 0:
            raise ValueError(f"grid points must be positive, got {n}")
        wn = w(n)
        if wn == 0:
            continue
        ratio = n * n * abs(second_difference(w, n)) / abs(wn)
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise ValueError("w vanishes on every grid point")
    return best


def rho_grid(total: float, points: int = 512) -> np.ndarray:
    """Geometric grid on ``[1, n_I]`` used for the curvature estimate."""
    return np.geomspace(1.0, max(float(total), 2.0), points)


def _bound(rho, w_excl, n_players, mu, sigma2, R, n_max):
    if np.any(np.asarray(mu) == 0):
        raise ValueError("mean size of the other players is zero")
    return (rho * np.abs(w_excl) / ((n_players - 1) * mu**2)
            * (9 * sigma2 * (1 + math.log(n_players - 1)) + 2 * R**2 * n_max))


def du_bias_bound(w: CardinalUtility, g: GameSpec, i: int, rho: float) -> float:
    """Upper bound on ``|phi_i - psi_i|`` for DU-Shapley."""
    st = size_stats(g, i)
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return float(_bound(rho, w(st.n_excl_i), g.n_players, st.mu_minus_i,
                        st.sigma2_minus_i, st.R_minus_i, st.n_max_minus_i))


def du_bias_bounds(w: CardinalUtility, g: GameSpec, rho: float) -> np.ndarray:
    """:func:`du_bias_bound` for every player, vectorised over sizes."""
    st = size_stats_all(g.sizes)
    w_excl = np.array([w(float(x)) for x in st["n_excl"]])
    return _bound(rho, w_excl, g.n_players, st["mu"], st["sigma2"], st["R"], st["n_max"])


def mc_error_at_budget(w_grand: float, n_players: int, delta: float) -> float:
    """Hoeffding error of permutation MC with ``T = I`` samples."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if n_players < 1:
        raise ValueError("I must be >= 1")
    return 2.0 * w_grand**2 * math.log(2 * n_players / delta)


@dataclass
class BoundReport:
    du_bound: list[float]
    mc_error: float
    rho: float
    crossing: bool

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), **kw)


def bound_report(w: CardinalUtility, g: GameSpec, delta: float = 0.1,
                 rho: Optional[float] = None) -> BoundReport:
    if rho is None:
        rho = estimate_rho(w, rho_grid(g.total))
    du = du_bias_bounds(w, g, rho)
    mc = mc_error_at_budget(w(g.total), g.n_players, delta)
    return BoundReport([float(x) for x in du], mc, float(rho), bool(du.mean() < mc))
