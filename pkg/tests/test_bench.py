import math

import numpy as np
import pytest

from dushap.bench import (ComparisonConfig, MseTable, SizeDistribution, bounds_experiment,
                          convergence_experiment, crossing_index, manifest, reference_values,
                          render, run_comparison)
from dushap.game_core import GameSpec
from dushap.games import sqrt_utility

from conftest import cardinal_game


def test_size_distribution_parse_and_draw():
    rng = np.random.default_rng(0)
    d = SizeDistribution.parse("uniform:10:20")
    g = d.draw(50, rng)
    assert min(g.sizes) >= 10 and max(g.sizes) <= 20
    assert SizeDistribution.parse("pow2").draw(4, rng).sizes == (2, 4, 8, 16)
    assert str(SizeDistribution.parse("explicit:1,2")) == "explicit:1,2"
    with pytest.raises(ValueError):
        SizeDistribution.parse("normal:1:2")


def test_comparison_config_validation():
    with pytest.raises(ValueError):
        ComparisonConfig(3, estimations_per_mse=1)
    with pytest.raises(ValueError):
        ComparisonConfig(3, methods=("mc", "bogus"))
    assert ComparisonConfig(7).budget_terms == 7


def test_exact_and_du_zero_mse_under_homogeneity():
    u, w, g = cardinal_game((5,) * 6, math.sqrt)
    cfg = ComparisonConfig(6, SizeDistribution.parse("explicit:5,5,5,5,5,5"),
                           ("exact", "du", "dupp", "mc"), estimations_per_mse=3, mse_repetitions=2)
    table = run_comparison(cfg, u, w, g)
    summ = table.summary()
    assert summ["exact"]["max"] == 0.0
    assert summ["du"]["max"] <= 1e-20 and summ["dupp"]["max"] <= 1e-20
    assert summ["mc"]["mean"] > 0
    assert len(table.csv_rows()) == 8


def test_odd_budget_skips_antithetic():
    u, w, g = cardinal_game((1, 2, 3), math.sqrt)
    cfg = ComparisonConfig(3, SizeDistribution.parse("explicit:1,2,3"), ("mc", "mc-anti"),
                           estimations_per_mse=2, mse_repetitions=2)
    table = run_comparison(cfg, u, w, g)
    assert len(table.per_repetition("mc-anti")) == 0


def test_comparison_deterministic_across_threads():
    u, w, g = cardinal_game((3, 9, 27, 81), math.sqrt)
    base = dict(I=4, size_distribution=SizeDistribution.parse("explicit:3,9,27,81"),
                estimations_per_mse=4, mse_repetitions=3, master_seed=11)
    a = run_comparison(ComparisonConfig(**base, threads=1), u, w, g).csv_rows()
    b = run_comparison(ComparisonConfig(**base, threads=3), u, w, g).csv_rows()
    assert a == b


def test_reference_values_cross_check(sqrt_game):
    u, _, g = sqrt_game
    assert reference_values(u, g).shape == (3,)


def test_mse_table_rejects_negative():
    with pytest.raises(ValueError):
        MseTable(3, "x").add("mc", 3, 0, -1.0)


def test_convergence_equal_sizes_atoms():
    res = convergence_experiment(5, [7] * 5, 5000, seed=0)
    assert res.histogram.sum() == 5000
    # five atoms at k/4; the KS distance to U[0,1] is O(1/I)
    assert res.ks <= 0.25
    with pytest.raises(ValueError):
        convergence_experiment(5, [7] * 5, 10, seed=0)


def test_convergence_ks_stable_in_samples():
    dist = SizeDistribution("uniform", 1, 100)
    a = convergence_experiment(50, dist, 20_000, seed=1).ks
    b = convergence_experiment(50, dist, 40_000, seed=2).ks
    assert abs(a - b) < 0.03


def test_bounds_experiment_and_crossing():
    rows = bounds_experiment([5, 20, 100], draws=5, seed=0)
    mc = [r[2] for r in rows]
    assert mc == sorted(mc)
    assert crossing_index([(5, 2.0, 1.0), (10, 0.5, 1.0), (20, 0.4, 1.0)]) == 10
    assert crossing_index([(5, 0.5, 1.0), (10, 2.0, 1.0)]) is None


def test_bounds_spread_shrinks_with_draws():
    few = [bounds_experiment([20], draws=1, seed=s)[0][1] for s in range(10)]
    many = [bounds_experiment([20], draws=30, seed=s)[0][1] for s in range(10)]
    assert np.std(many) < np.std(few)


def test_render_formats():
    meta = manifest({"a": 1}, 5)
    text = render(("x", "y"), [(1, 0.1)], meta)
    lines = text.splitlines()
    assert lines[0].startswith("# version: ") and lines[1].startswith("# manifest: ")
    assert lines[2:] == ["x,y", "1,0.1"]
    assert '"columns"' in render(("x",), [(np.float64(2.5),)], meta, "json")
