import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dushap import _kernels_py, kernels

compiled = pytest.importorskip("dushap._kernels")


def test_backend_selection():
    forced = os.environ.get("DUSHAP_PURE_PYTHON") == "1"
    assert kernels.BACKEND == ("python" if forced else "cython")


@given(st.lists(st.integers(0, 10**9), min_size=0, max_size=14))
def test_subset_sums_match_definition(sizes):
    out = compiled.subset_sums(np.array(sizes, dtype=np.int64))
    assert np.array_equal(out, _kernels_py.subset_sums(sizes))
    for mask in (0, len(out) - 1, len(out) // 2):
        assert out[mask] == sum(s for j, s in enumerate(sizes) if mask >> j & 1)


@settings(max_examples=30)
@given(st.integers(1, 11), st.integers(0, 2**32 - 1))
def test_layer_sums_bitwise_equal_across_backends(n, seed):
    table = np.random.default_rng(seed).normal(size=1 << n)
    a = compiled.layer_marginal_sums(table, n)
    b = _kernels_py.layer_marginal_sums(table, n)
    assert np.array_equal(a, b)


def test_layer_sums_brute_force():
    n = 4
    table = np.random.default_rng(1).normal(size=1 << n)
    out = kernels.layer_marginal_sums(table, n)
    for i in range(n):
        for k in range(n):
            expect = sum(table[m | 1 << i] - table[m] for m in range(1 << n)
                         if not m >> i & 1 and bin(m).count("1") == k)
            assert out[i, k] == pytest.approx(expect, abs=1e-12)


def test_layer_sums_shape_check():
    with pytest.raises(ValueError):
        kernels.layer_marginal_sums(np.zeros(7), 3)


@settings(max_examples=30)
@given(st.integers(1, 62), st.integers(0, 2**32 - 1))
def test_sampling_kernels_agree(n, seed):
    rng = np.random.default_rng(seed)
    perms = np.array([rng.permutation(n) for _ in range(20)])
    player = int(rng.integers(n))
    a = compiled.predecessor_masks(perms, player)
    assert np.array_equal(a, _kernels_py.predecessor_masks(perms, player))
    row = perms[0]
    pos = list(row).index(player)
    assert a[0] == sum(1 << int(p) for p in row[:pos])
    u, taus = rng.random((20, n)), rng.random(20)
    b = compiled.bernoulli_masks(u, taus, player)
    assert np.array_equal(b, _kernels_py.bernoulli_masks(u, taus, player))
    assert not np.any(b >> player & 1)
