"""Shapley value estimators.

Sampling estimators (MC, antithetic MC, Owen) draw from one independent
stream per player, derived from the master seed with
:class:`numpy.random.SeedSequence`, so results do not depend on how the
players are scheduled across threads. DU and DU++ are deterministic and
work on the cardinal utility directly.

Budget is counted in *terms*: one term is one marginal difference, i.e. two
utility evaluations.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .game_core import CardinalUtility, GameSpec, SetUtility, ValuationVector


class Method(enum.Enum):
    MC = "mc"
    MC_ANTITHETIC = "mc-anti"
    OWEN = "owen"
    DU = "du"
    DUPP = "dupp"

    @property
    def stochastic(self) -> bool:
        return self in (Method.MC, Method.MC_ANTITHETIC, Method.OWEN)


# stream tags keep the per-method substreams disjoint
_TAGS = {Method.MC: 1, Method.MC_ANTITHETIC: 2, Method.OWEN: 3}


@dataclass(frozen=True)
class EstimatorConfig:
    method: Method = Method.MC
    budget_terms: int = 1
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.method.stochastic and self.budget_terms < 1:
            raise ValueError("budget_terms must be >= 1")


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed, stable for a given ``(seed, key)``."""
    words = np.random.SeedSequence(seed, spawn_key=key).generate_state(2, np.uint32)
    return int(words[0]) << 32 | int(words[1])


def map_players(fn: Callable[[int], float], n_players: int, threads: int = 1) -> list[float]:
    if threads <= 1 or n_players == 1:
        return [fn(i) for i in range(n_players)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_players)))


def _predecessor_masks(perms: np.ndarray, player: int) -> list[int]:
    if perms.shape[1] <= kernels.MAX_MASK_PLAYERS:
        return [int(m) for m in kernels.predecessor_masks(perms, player)]
    out = []
    for row in perms:
        mask = 0
        for p in row:
            if p == player:
                break
            mask |= 1 << int(p)
        out.append(mask)
    return out


def _sample_permutations(rng: np.random.Generator, n_players: int, count: int) -> np.ndarray:
    return rng.permuted(np.tile(np.arange(n_players, dtype=np.int64), (count, 1)), axis=1)


def mc_shapley(u: SetUtility, g: GameSpec, cfg: EstimatorConfig) -> ValuationVector:
    """Average marginal contribution over ``T`` uniform random permutations."""
    n, T = g.n_players, cfg.budget_terms
    if T < 1:
        raise ValueError("MC needs at least one sample")

    def one(i: int) -> float:
        rng = substream(cfg.seed, _TAGS[Method.MC], i)
        bit = 1 << i
        masks = _predecessor_masks(_sample_permutations(rng, n, T), i)
        return math.fsum(u(m | bit) - u(m) for m in masks) / T

    values = map_players(one, n, cfg.threads)
    return ValuationVector(np.array(values), budget_used=T, seed=cfg.seed, method="mc")


def mc_antithetic_shapley(u: SetUtility, g: GameSpec, cfg: EstimatorConfig) -> ValuationVector:
    """MC over ``T/2`` permutations, each paired with its reversal."""
    n, T = g.n_players, cfg.budget_terms
    if T < 2 or T % 2:
        raise ValueError(f"antithetic sampling needs an even budget >= 2, got {T}")
    grand = (1 << n) - 1

    def one(i: int) -> float:
        rng = substream(cfg.seed, _TAGS[Method.MC_ANTITHETIC], i)
        bit = 1 << i
        masks = _predecessor_masks(_sample_permutations(rng, n, T // 2), i)
        terms = []
        for m in masks:
            # predecessors in the reversed permutation are the successors here
            r = grand & ~m & ~bit
            terms.append(u(m | bit) - u(m))
            terms.append(u(r | bit) - u(r))
        return math.fsum(terms) / T

    values = map_players(one, n, cfg.threads)
    return ValuationVector(np.array(values), budget_used=T, seed=cfg.seed, method="mc-anti")


def owen_shapley(u: SetUtility, g: GameSpec, cfg: EstimatorConfig) -> ValuationVector:
    """Multilinear-extension sampling: ``tau ~ U[0,1]``, then each other
    player joins independently with probability ``tau``."""
    n, T = g.n_players, cfg.budget_terms
    if T < 1:
        raise ValueError("Owen sampling needs at least one sample")

    def one(i: int) -> float:
        rng = substream(cfg.seed, _TAGS[Method.OWEN], i)
        bit = 1 << i
        taus = rng.random(T)
        draws = rng.random((T, n))
        if n <= kernels.MAX_MASK_PLAYERS:
            masks = [int(m) for m in kernels.bernoulli_masks(draws, taus, i)]
        else:
            masks = [sum(1 << j for j in range(n) if j != i and row[j] < tau)
                     for row, tau in zip(draws, taus)]
        return math.fsum(u(m | bit) - u(m) for m in masks) / T

    values = map_players(one, n, cfg.threads)
    return ValuationVector(np.array(values), budget_used=T, seed=cfg.seed, method="owen")


CardinalLike = Union[CardinalUtility, Sequence[CardinalUtility]]


def _for_player(w: CardinalLike, i: int) -> CardinalUtility:
    return w if isinstance(w, CardinalUtility) else w[i]


def mean_size_excluding(g: GameSpec, i: int) -> float:
    if g.n_players < 2:
        raise ValueError("the mean size excluding a player needs I >= 2")
    return g.excluding(i) / (g.n_players - 1)


def _grid_average(w: CardinalLike, g: GameSpec, grid: Callable[[int], list[float]],
                  threads: int) -> list[float]:
    n = g.n_players

    def one(i: int) -> float:
        wi = _for_player(w, i)
        return math.fsum(wi.delta(b, g.sizes[i]) for b in grid(i)) / n

    return map_players(one, n, threads)


def du_shapley(w: CardinalLike, g: GameSpec, threads: int = 1) -> ValuationVector:
    """Discrete uniform Shapley: marginal terms on the grid ``k * mu_{-i}``.

    ``w`` is either one cardinal utility shared by all players or one per
    player (empirical proxies). Each player costs ``I`` terms.
    """
    n = g.n_players

    def grid(i: int) -> list[float]:
        if n == 1:
            return [0.0]
        mu = mean_size_excluding(g, i)
        return [k * mu for k in range(n)]

    values = _grid_average(w, g, grid, threads)
    return ValuationVector(np.array(values), budget_used=n, method="du")


def du_shapley_pp(w: CardinalLike, g: GameSpec, threads: int = 1) -> ValuationVector:
    """DU-Shapley with the empty and full cardinality layers taken exactly.

    The first and last grid points are the realised sizes ``0`` and
    ``n_{I - i}``; the ``I - 2`` middle layers use ``k * mu_{-i}``. For
    ``I <= 2`` only extreme layers exist and the result is exact.
    """
    n = g.n_players

    def grid(i: int) -> list[float]:
        if n == 1:
            return [0.0]
        mu = mean_size_excluding(g, i)
        return [0.0] + [k * mu for k in range(1, n - 1)] + [float(g.excluding(i))]

    values = _grid_average(w, g, grid, threads)
    return ValuationVector(np.array(values), budget_used=n, method="dupp")


def estimate(method: Union[Method, str], g: GameSpec, *, u: Optional[SetUtility] = None,
             w: Optional[CardinalLike] = None, budget_terms: int = 1, seed: int = 0,
             threads: int = 1) -> ValuationVector:
    method = Method(method)
    if method in (Method.DU, Method.DUPP):
        if w is None:
            raise ValueError(f"{method.value} needs a cardinal utility")
        fn = du_shapley if method is Method.DU else du_shapley_pp
        return fn(w, g, threads=threads)
    if u is None:
        raise ValueError(f"{method.value} needs a set utility")
    cfg = EstimatorConfig(method, budget_terms, seed, threads)
    fn = {Method.MC: mc_shapley, Method.MC_ANTITHETIC: mc_antithetic_shapley,
          Method.OWEN: owen_shapley}[method]
    return fn(u, g, cfg)


def t_perm(epsilon: float, delta: float, r_u: float, n_players: int) -> int:
    """Hoeffding sample count for an ``(epsilon, delta)`` permutation-MC guarantee."""
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    if r_u <= 0 or n_players < 1:
        raise ValueError("r_u must be positive and I >= 1")
    return math.ceil(2 * r_u**2 * n_players / epsilon**2 * math.log(2 * n_players / delta))
