"""Players, coalitions, dataset sizes and the two utility contracts.

Coalitions are bitmasks over player indices (Python ints, so capacity is
unbounded). A :class:`SetUtility` maps a coalition to a real number; a
:class:`CardinalUtility` maps an aggregate dataset size to a real number.
Both count their invocations with a thread-safe counter.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from . import kernels


class NonFiniteUtilityError(ValueError):
    """A utility returned NaN or an infinity."""


class PlayerCapError(ValueError):
    """Too many players for an exhaustive computation."""


@dataclass(frozen=True)
class GameSpec:
    """Per-player dataset sizes ``n_i``; the skeleton of every game."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) < 1:
            raise ValueError("a game needs at least one player")
        if any(s < 0 for s in sizes):
            raise ValueError(f"dataset sizes must be non-negative, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def n_players(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def excluding(self, i: int) -> int:
        """Aggregate size of every player but ``i``."""
        self._check_player(i)
        return self.total - self.sizes[i]

    def grand_mask(self) -> int:
        return (1 << self.n_players) - 1

    def aggregate(self, mask: int) -> int:
        total = 0
        i = 0
        while mask:
            if mask & 1:
                total += self.sizes[i]
            mask >>= 1
            i += 1
        return total

    def _check_player(self, i: int) -> None:
        if not 0 <= i < self.n_players:
            raise IndexError(f"player {i} out of range for I={self.n_players}")

    @classmethod
    def parse(cls, text: str) -> "GameSpec":
        """Parse ``"1,2,4"`` or the one-size-per-line file format."""
        tokens = [t.strip() for t in text.replace(",", "\n").splitlines()]
        tokens = [t for t in tokens if t and not t.startswith("#")]
        return cls(tuple(int(t) for t in tokens))

    @classmethod
    def read(cls, path: Union[str, Path]) -> "GameSpec":
        return cls.parse(Path(path).read_text())

    def to_text(self) -> str:
        return "".join(f"{s}\n" for s in self.sizes)

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())


@dataclass(frozen=True)
class Coalition:
    """A subset of ``[0, n_players)`` stored as a bitmask."""

    mask: int
    n_players: int

    def __post_init__(self):
        if self.mask < 0 or self.mask >> self.n_players:
            raise IndexError(f"mask {self.mask:#x} has members outside [0, {self.n_players})")

    @classmethod
    def empty(cls, n_players: int) -> "Coalition":
        return cls(0, n_players)

    @classmethod
    def of(cls, members: Iterable[int], n_players: int) -> "Coalition":
        mask = 0
        for p in members:
            _check_index(p, n_players)
            mask |= 1 << p
        return cls(mask, n_players)

    def insert(self, p: int) -> "Coalition":
        _check_index(p, self.n_players)
        return Coalition(self.mask | (1 << p), self.n_players)

    def remove(self, p: int) -> "Coalition":
        _check_index(p, self.n_players)
        return Coalition(self.mask & ~(1 << p), self.n_players)

    def contains(self, p: int) -> bool:
        _check_index(p, self.n_players)
        return bool(self.mask >> p & 1)

    def size(self) -> int:
        return bin(self.mask).count("1")

    def complement(self) -> "Coalition":
        return Coalition(((1 << self.n_players) - 1) & ~self.mask, self.n_players)

    def members(self) -> list[int]:
        return [p for p in range(self.n_players) if self.mask >> p & 1]

    def __iter__(self) -> Iterator[int]:
        return iter(self.members())

    def __len__(self) -> int:
        return self.size()


def _check_index(p: int, n_players: int) -> None:
    if not 0 <= p < n_players:
        raise IndexError(f"player {p} out of range for I={n_players}")


def aggregate_size(c: Union[Coalition, int], g: GameSpec) -> int:
    """Total number of data points held by the members of ``c``."""
    mask = c.mask if isinstance(c, Coalition) else c
    if mask >> g.n_players:
        raise IndexError("coalition has members outside the game")
    return g.aggregate(mask)


class EvalCounter:
    """Monotone invocation counter, safe to advance from several threads."""

    def __init__(self):
        self._n = 0
        self._lock = threading.Lock()

    def add(self, k: int = 1) -> None:
        with self._lock:
            self._n += k

    @property
    def value(self) -> int:
        return self._n


def _finite(value, where: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise NonFiniteUtilityError(f"utility returned {value} at {where}")
    return value


class SetUtility:
    """Utility over coalitions, ``u : 2^I -> R``.

    ``fn`` receives an integer bitmask. Calls may come from several threads
    at once, so ``fn`` must be pure.
    """

    def __init__(self, fn: Callable[[int], float], n_players: int, name: str = "u"):
        self._fn = fn
        self.n_players = n_players
        self.name = name
        self._counter = EvalCounter()

    def __call__(self, coalition: Union[Coalition, int]) -> float:
        mask = coalition.mask if isinstance(coalition, Coalition) else int(coalition)
        self._counter.add()
        return _finite(self._fn(mask), f"{self.name}({mask:#x})")

    @property
    def eval_count(self) -> int:
        return self._counter.value

    def tabulate(self) -> np.ndarray:
        """Values on every mask ``0 .. 2^I - 1`` (``2^I`` evaluations)."""
        return np.array([self(m) for m in range(1 << self.n_players)], dtype=np.float64)

    def __add__(self, other: "SetUtility") -> "SetUtility":
        if other.n_players != self.n_players:
            raise ValueError("utilities are defined on different player sets")
        return SetUtility(lambda m: self._fn(m) + other._fn(m), self.n_players,
                          f"({self.name}+{other.name})")

    def scaled(self, alpha: float) -> "SetUtility":
        return SetUtility(lambda m: alpha * self._fn(m), self.n_players, f"{alpha}*{self.name}")

    def shifted(self, c: float) -> "SetUtility":
        return SetUtility(lambda m: self._fn(m) + c, self.n_players, f"{self.name}+{c}")


class CardinalUtility:
    """Utility as a function of aggregate size, ``w : R+ -> R``.

    Arguments may be fractional (DU grids sit at ``k * mean size``).
    """

    def __init__(self, fn: Callable[[float], float], name: str = "w"):
        self._fn = fn
        self.name = name
        self._counter = EvalCounter()

    @property
    def fn(self) -> Callable[[float], float]:
        """The raw function, without counting or finiteness checks."""
        return self._fn

    def __call__(self, n: float) -> float:
        if n < 0:
            raise ValueError(f"{self.name} is defined on n >= 0, got {n}")
        self._counter.add()
        return _finite(self._fn(n), f"{self.name}({n})")

    def delta(self, base: float, added: float) -> float:
        """One marginal term ``w(base + added) - w(base)``."""
        return self(base + added) - self(base)

    @property
    def eval_count(self) -> int:
        return self._counter.value

    def scaled(self, alpha: float) -> "CardinalUtility":
        return CardinalUtility(lambda n: alpha * self._fn(n), f"{alpha}*{self.name}")


class CardinalSetUtility(SetUtility):
    """``u(S) = w(n_S)``; tabulation goes through the subset-sum kernel."""

    def __init__(self, w: CardinalUtility, game: GameSpec):
        self.w = w
        self.game = game
        super().__init__(lambda m: w(game.aggregate(m)), game.n_players, f"{w.name}(n_S)")

    def tabulate(self) -> np.ndarray:
        sums = kernels.subset_sums(np.asarray(self.game.sizes, dtype=np.int64))
        self._counter.add(len(sums))
        return np.array([self.w(int(s)) for s in sums], dtype=np.float64)


def cardinal_to_set_utility(w: CardinalUtility, g: GameSpec) -> SetUtility:
    return CardinalSetUtility(w, g)


class NormalizedUtility(SetUtility):
    """``u(S) - u(empty)``, so that the empty coalition is worth zero."""

    def __init__(self, base: SetUtility):
        self.base = base
        self.offset = base(0)
        super().__init__(lambda m: base(m) - self.offset, base.n_players, f"norm({base.name})")

    def tabulate(self) -> np.ndarray:
        table = self.base.tabulate() - self.offset
        self._counter.add(len(table))
        return table


def normalize_utility(u: SetUtility) -> SetUtility:
    return NormalizedUtility(u)


@dataclass
class ValuationVector:
    """One value per player plus the metadata needed to reproduce it."""

    values: np.ndarray
    budget_used: int
    seed: Optional[int] = None
    method: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "values": [float(v) for v in self.values],
            "budget_used": int(self.budget_used),
            "seed": self.seed,
        }
        out.update(self.extra)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ValuationVector":
        known = {"method", "values", "budget_used", "seed"}
        return cls(np.asarray(d["values"], dtype=np.float64), int(d["budget_used"]),
                   d.get("seed"), d.get("method", ""),
                   {k: v for k, v in d.items() if k not in known})


def sizes_array(g: Union[GameSpec, Sequence[int]]) -> np.ndarray:
    sizes = g.sizes if isinstance(g, GameSpec) else g
    return np.asarray(sizes, dtype=np.int64)
