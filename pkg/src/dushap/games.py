"""Built-in cardinal games and the ``name:key=value`` game spec parser."""

from __future__ import annotations

import math

from .game_core import CardinalUtility


def sqrt_utility() -> CardinalUtility:
    return CardinalUtility(math.sqrt, "sqrt")


def square_utility() -> CardinalUtility:
    return CardinalUtility(lambda n: n * n, "square")


def linear_utility(c: float = 1.0) -> CardinalUtility:
    return CardinalUtility(lambda n: c * n, "linear")


def saturating_utility(scale: float) -> CardinalUtility:
    """``w(n) = 1 - scale / (scale + n) = n / (scale + n)``."""
    return CardinalUtility(lambda n: 1.0 - scale / (scale + n), f"sat[{scale:g}]")


def knee_scale(total: int) -> float:
    """``10^k`` with ``k = floor(log10 n_I) - 1``."""
    return 10.0 ** (math.floor(math.log10(total)) - 1)


def knee_utility(total: int) -> CardinalUtility:
    """Saturating utility whose knee tracks the grand-coalition size."""
    return saturating_utility(knee_scale(total))


def parse_game_spec(spec: str) -> tuple[str, dict[str, str]]:
    """``"regression:d=10,sigma=1"`` -> ``("regression", {"d": "10", "sigma": "1"})``."""
    name, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"malformed game parameter {item!r} in {spec!r}")
        params[key.strip()] = value.strip()
    return name.strip(), params
