"""NumPy fallback for the compiled kernels in ``_kernels.pyx``.

Both implementations accumulate floating point sums in ascending mask
order, so their outputs agree bitwise.
"""

import numpy as np


def subset_sums(sizes):
    sizes = np.ascontiguousarray(sizes, dtype=np.int64)
    out = np.zeros(1, dtype=np.int64)
    for s in sizes:
        out = np.concatenate([out, out + s])
    return out


def _popcounts(n_players):
    pc = np.zeros(1, dtype=np.int64)
    for _ in range(n_players):
        pc = np.concatenate([pc, pc + 1])
    return pc


def layer_marginal_sums(table, n_players):
    """``out[i, k]`` = sum over ``|S| = k``, ``i`` not in ``S``, of ``t[S+i] - t[S]``."""
    table = np.ascontiguousarray(table, dtype=np.float64)
    n = int(n_players)
    if table.shape != (1 << n,):
        raise ValueError(f"table must have length 2^{n}")
    pc = _popcounts(n)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        t = table.reshape(-1, 2, 1 << i)
        diff = (t[:, 1, :] - t[:, 0, :]).ravel()
        k = pc.reshape(-1, 2, 1 << i)[:, 0, :].ravel()
        # bincount adds sequentially in input order
        out[i] = np.bincount(k, weights=diff, minlength=n)[:n]
    return out


def predecessor_masks(perms, player):
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    if perms.shape[1] > 62:
        raise ValueError("bitmask kernels support at most 62 players")
    bits = np.left_shift(np.int64(1), perms)
    before = np.cumsum(bits, axis=1) - bits
    pos = np.argmax(perms == player, axis=1)
    return before[np.arange(len(perms)), pos]


def bernoulli_masks(uniforms, taus, player):
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    taus = np.ascontiguousarray(taus, dtype=np.float64)
    n = uniforms.shape[1]
    if n > 62:
        raise ValueError("bitmask kernels support at most 62 players")
    members = uniforms < taus[:, None]
    members[:, player] = False
    weights = np.left_shift(np.int64(1), np.arange(n, dtype=np.int64))
    return (members * weights).sum(axis=1).astype(np.int64)
