import math

import pytest

from dushap.game_core import CardinalUtility, GameSpec, cardinal_to_set_utility, normalize_utility


def cardinal_game(sizes, fn, name="w"):
    g = GameSpec(tuple(sizes))
    w = CardinalUtility(fn, name)
    return normalize_utility(cardinal_to_set_utility(w, g)), w, g


@pytest.fixture
def sqrt_game():
    return cardinal_game((1, 2, 4), math.sqrt, "sqrt")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
