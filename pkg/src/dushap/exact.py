"""Ground-truth Shapley values by full enumeration.

Two independent routes: the subset form tabulates ``u`` once and reduces
marginal contributions per cardinality layer (compiled kernel), the
permutation form walks every ordering of the players.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .game_core import GameSpec, PlayerCapError, SetUtility, ValuationVector


class Form(enum.Enum):
    SUBSETS = "subsets"
    PERMUTATIONS = "permutations"


@dataclass(frozen=True)
class ExactConfig:
    form: Form = Form.SUBSETS
    max_players_subsets: int = 25
    max_players_permutations: int = 10


def layer_weights(n_players: int) -> list[float]:
    """``1 / (I * C(I-1, k))`` for ``k = 0 .. I-1``, from exact binomials."""
    return [1.0 / (n_players * math.comb(n_players - 1, k)) for k in range(n_players)]


def exact_layers(u: SetUtility, g: GameSpec, config: ExactConfig = ExactConfig()) -> np.ndarray:
    """Per-player, per-cardinality sums of marginal contributions.

    ``out[i, k]`` sums ``u(S + i) - u(S)`` over every ``S`` of size ``k``
    not containing ``i``.
    """
    n = g.n_players
    if n > config.max_players_subsets:
        raise PlayerCapError(f"subset enumeration refuses I={n} > {config.max_players_subsets}")
    if u.n_players != n:
        raise ValueError("utility and game disagree on the number of players")
    return kernels.layer_marginal_sums(u.tabulate(), n)


def exact_shapley_subsets(u: SetUtility, g: GameSpec,
                          config: ExactConfig = ExactConfig()) -> ValuationVector:
    n = g.n_players
    layers = exact_layers(u, g, config)
    weights = layer_weights(n)
    values = [math.fsum(layers[i, k] * weights[k] for k in range(n)) for i in range(n)]
    return ValuationVector(np.array(values), budget_used=1 << (n - 1), method="exact")


def exact_shapley_permutations(u: SetUtility, g: GameSpec,
                               config: ExactConfig = ExactConfig()) -> ValuationVector:
    n = g.n_players
    if n > config.max_players_permutations:
        raise PlayerCapError(
            f"permutation enumeration refuses I={n} > {config.max_players_permutations}")
    cache: dict[int, float] = {}

    def value(mask: int) -> float:
        if mask not in cache:
            cache[mask] = u(mask)
        return cache[mask]

    contributions: list[list[float]] = [[] for _ in range(n)]
    for perm in itertools.permutations(range(n)):
        mask = 0
        before = value(0)
        for p in perm:
            mask |= 1 << p
            after = value(mask)
            contributions[p].append(after - before)
            before = after
    count = math.factorial(n)
    values = [math.fsum(c) / count for c in contributions]
    return ValuationVector(np.array(values), budget_used=count, method="exact-permutations")


def exact_shapley(u: SetUtility, g: GameSpec,
                  config: ExactConfig = ExactConfig()) -> ValuationVector:
    if config.form is Form.PERMUTATIONS:
        return exact_shapley_permutations(u, g, config)
    return exact_shapley_subsets(u, g, config)


@dataclass
class AxiomReport:
    efficiency: bool
    efficiency_gap: float
    dummy: dict[int, bool] = field(default_factory=dict)
    symmetry: dict[tuple[int, int], bool] = field(default_factory=dict)
    linearity: Optional[bool] = None
    linearity_gap: Optional[float] = None

    @property
    def passed(self) -> bool:
        return (self.efficiency and all(self.dummy.values()) and all(self.symmetry.values())
                and self.linearity is not False)

    def lines(self) -> list[str]:
        out = [f"efficiency: {'pass' if self.efficiency else 'FAIL'} (gap {self.efficiency_gap:.3g})"]
        out += [f"dummy[{i}]: {'pass' if ok else 'FAIL'}" for i, ok in self.dummy.items()]
        out += [f"symmetry{pair}: {'pass' if ok else 'FAIL'}" for pair, ok in self.symmetry.items()]
        if self.linearity is not None:
            out.append(f"linearity: {'pass' if self.linearity else 'FAIL'} (gap {self.linearity_gap:.3g})")
        return out


AXIOM_MAX_PLAYERS = 15


def check_axioms(u: SetUtility, g: GameSpec, phi: ValuationVector, tol: float = 1e-10,
                 other: Optional[SetUtility] = None) -> AxiomReport:
    """Check efficiency, dummy, symmetry and (given ``other``) linearity.

    Dummy players and symmetric pairs are detected by enumerating every
    coalition, hence the ``I <= 15`` gate.
    """
    n = g.n_players
    if n > AXIOM_MAX_PLAYERS:
        raise PlayerCapError(f"axiom checks are limited to I <= {AXIOM_MAX_PLAYERS}")
    values = np.asarray(phi.values)
    table = u.tabulate()
    grand = (1 << n) - 1
    gap = abs(math.fsum(values) - (table[grand] - table[0]))
    report = AxiomReport(efficiency=bool(gap <= tol), efficiency_gap=gap)

    masks = np.arange(1 << n)
    for i in range(n):
        bit = 1 << i
        free = masks[(masks & bit) == 0]
        if np.all(np.abs(table[free | bit] - table[free]) <= tol):
            report.dummy[i] = bool(abs(values[i]) <= tol)
    for i, j in itertools.combinations(range(n), 2):
        bi, bj = 1 << i, 1 << j
        free = masks[(masks & (bi | bj)) == 0]
        if np.all(np.abs(table[free | bi] - table[free | bj]) <= tol):
            report.symmetry[(i, j)] = bool(abs(values[i] - values[j]) <= tol)

    if other is not None:
        phi_u = exact_shapley_subsets(u, g).values
        phi_v = exact_shapley_subsets(other, g).values
        phi_sum = exact_shapley_subsets(u + other, g).values
        lin_gap = float(np.max(np.abs(phi_sum - phi_u - phi_v)))
        report.linearity = bool(lin_gap <= tol)
        report.linearity_gap = lin_gap
    return report
