"""Experiment harness: estimator MSE comparison, convergence of the
normalised coalition size, and DU-bound versus MC-error curves.

Every experiment is a pure function of its config and master seed.
Sub-seeds are derived per (method, repetition, estimation) or per grid
point, so thread count never changes the output.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence, TextIO, Union

import numpy as np
from scipy import stats

from . import __version__
from .bounds import du_bias_bounds, estimate_rho, mc_error_at_budget, rho_grid
from .estimators import (CardinalLike, EstimatorConfig, Method, derive_seed, du_shapley,
                         du_shapley_pp, mc_antithetic_shapley, mc_shapley, owen_shapley,
                         substream)
from .exact import exact_shapley_permutations, exact_shapley_subsets
from .game_core import CardinalUtility, GameSpec, SetUtility
from .games import knee_utility

log = logging.getLogger(__name__)

COMPARISON_HEADER = ("experiment", "method", "I", "budget", "repetition", "mse")
CONVERGENCE_HEADER = ("I", "ks", "samples")
BOUNDS_HEADER = ("I", "du_bound_mean", "mc_error")

ALL_METHODS = ("exact", "mc", "mc-anti", "owen", "du", "dupp")
# fixed stream index per method so adding a method never shifts the others
_METHOD_STREAM = {name: k for k, name in enumerate(ALL_METHODS)}


@dataclass(frozen=True)
class SizeDistribution:
    """``uniform:LO:HI`` (inclusive), ``pow2`` (``2^1 .. 2^I``) or ``explicit``."""

    kind: str
    lo: int = 0
    hi: int = 0
    values: tuple[int, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "SizeDistribution":
        parts = text.split(":")
        if parts[0] == "uniform" and len(parts) == 3:
            lo, hi = int(parts[1]), int(parts[2])
            if not 0 <= lo <= hi:
                raise ValueError(f"bad uniform range in {text!r}")
            return cls("uniform", lo, hi)
        if parts == ["pow2"]:
            return cls("pow2")
        if parts[0] == "explicit" and len(parts) == 2:
            return cls("explicit", values=tuple(int(v) for v in parts[1].split(",")))
        raise ValueError(f"unknown size distribution {text!r}")

    def draw(self, n_players: int, rng: np.random.Generator) -> GameSpec:
        if self.kind == "uniform":
            return GameSpec(tuple(int(v) for v in rng.integers(self.lo, self.hi + 1, n_players)))
        if self.kind == "pow2":
            return GameSpec(tuple(2 ** i for i in range(1, n_players + 1)))
        if len(self.values) != n_players:
            raise ValueError("explicit sizes do not match I")
        return GameSpec(self.values)

    def __str__(self) -> str:
        if self.kind == "uniform":
            return f"uniform:{self.lo}:{self.hi}"
        if self.kind == "pow2":
            return "pow2"
        return "explicit:" + ",".join(map(str, self.values))


@dataclass
class ComparisonConfig:
    I: int
    size_distribution: SizeDistribution = field(
        default_factory=lambda: SizeDistribution("uniform", 10, 1000))
    methods: tuple[str, ...] = ("mc", "mc-anti", "owen", "du", "dupp")
    budget_terms: Optional[int] = None
    estimations_per_mse: int = 25
    mse_repetitions: int = 10
    master_seed: int = 0
    threads: int = 1
    experiment: str = "comparison"

    def __post_init__(self):
        if self.budget_terms is None:
            self.budget_terms = self.I
        if self.estimations_per_mse < 2 or self.mse_repetitions < 2:
            raise ValueError("need at least 2 estimations per MSE and 2 repetitions")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["size_distribution"] = str(self.size_distribution)
        d["methods"] = list(self.methods)
        return d


@dataclass
class MseTable:
    """One MSE per (method, repetition) plus summaries across repetitions."""

    I: int
    experiment: str
    rows: list[tuple[str, int, int, float]] = field(default_factory=list)
    reference: Optional[np.ndarray] = None

    def add(self, method: str, budget: int, repetition: int, mse: float) -> None:
        if mse < 0:
            raise ValueError("an MSE cannot be negative")
        self.rows.append((method, budget, repetition, mse))

    def per_repetition(self, method: str) -> np.ndarray:
        return np.array([r[3] for r in self.rows if r[0] == method])

    def summary(self) -> dict[str, dict[str, float]]:
        out = {}
        for method in dict.fromkeys(r[0] for r in self.rows):
            v = self.per_repetition(method)
            out[method] = {"mean": float(v.mean()), "min": float(v.min()), "max": float(v.max())}
        return out

    def csv_rows(self) -> list[tuple]:
        return [(self.experiment, m, self.I, b, rep, mse) for m, b, rep, mse in self.rows]


def _counts(w: Optional[CardinalLike]) -> int:
    if w is None:
        return 0
    if isinstance(w, CardinalUtility):
        return w.eval_count
    return sum(wi.eval_count for wi in w)


def _sampler(method: str) -> Callable[[SetUtility, GameSpec, EstimatorConfig], object]:
    return {"mc": mc_shapley, "mc-anti": mc_antithetic_shapley, "owen": owen_shapley}[method]


def reference_values(u: SetUtility, g: GameSpec) -> np.ndarray:
    """Exact values; cross-checked against the permutation form when I <= 8."""
    phi = exact_shapley_subsets(u, g).values
    if g.n_players <= 8:
        alt = exact_shapley_permutations(u, g).values
        gap = float(np.max(np.abs(alt - phi)))
        if gap > 1e-12 * max(1.0, float(np.max(np.abs(phi)))):
            raise ArithmeticError(f"subset and permutation forms disagree by {gap:.3g}")
    return phi


def run_comparison(cfg: ComparisonConfig, u: SetUtility, w: Optional[CardinalLike],
                   g: GameSpec, reference: Optional[np.ndarray] = None) -> MseTable:
    """MSE of each estimator against the exact values.

    For each repetition block the MSE averages squared errors over the
    ``estimations_per_mse`` runs for each player, then over players.
    """
    if g.n_players != cfg.I:
        raise ValueError("config I does not match the game")
    phi = reference_values(u, g) if reference is None else np.asarray(reference)
    table = MseTable(cfg.I, cfg.experiment, reference=phi)
    n, T = cfg.I, cfg.budget_terms
    for method in cfg.methods:
        if method == "exact":
            for rep in range(cfg.mse_repetitions):
                table.add(method, 1 << (n - 1), rep, 0.0)
            continue
        if method in ("du", "dupp"):
            if w is None:
                raise ValueError(f"{method} needs a cardinal utility")
            before = _counts(w)
            est = (du_shapley if method == "du" else du_shapley_pp)(w, g, threads=cfg.threads)
            used = _counts(w) - before
            if used != 2 * n * n:
                raise AssertionError(f"{method} used {used} evaluations, expected {2 * n * n}")
            mse = float(np.mean((est.values - phi) ** 2))
            for rep in range(cfg.mse_repetitions):
                table.add(method, n, rep, mse)
            continue
        if method == "mc-anti" and T % 2:
            log.warning("skipping mc-anti: budget %d is odd", T)
            continue
        fn = _sampler(method)
        stream = _METHOD_STREAM[method]
        for rep in range(cfg.mse_repetitions):
            sq = np.zeros(n)
            for e in range(cfg.estimations_per_mse):
                seed = derive_seed(cfg.master_seed, stream, rep, e)
                before = u.eval_count
                est = fn(u, g, EstimatorConfig(Method(method), T, seed, cfg.threads))
                used = u.eval_count - before
                if used != 2 * n * T:
                    raise AssertionError(f"{method} used {used} evaluations, expected {2 * n * T}")
                sq += (est.values - phi) ** 2
            table.add(method, T, rep, float(np.mean(sq / cfg.estimations_per_mse)))
    return table


@dataclass
class ConvergenceResult:
    I: int
    samples: int
    ks: float
    histogram: np.ndarray
    edges: np.ndarray

    def csv_row(self) -> tuple:
        return (self.I, self.ks, self.samples)


def normalized_coalition_sizes(sizes: Sequence[int], samples: int,
                               rng: np.random.Generator, chunk: int = 2000) -> np.ndarray:
    """Draws of ``n_S / n_{I - i}`` for the last player ``i``.

    ``K`` is uniform on ``0 .. I-1`` and ``S`` a uniform ``K``-subset of the
    other players, taken as the first ``K`` entries of a random permutation.
    """
    others = np.asarray(sizes[:-1], dtype=np.int64)
    total = others.sum()
    if total <= 0:
        raise ValueError("the other players hold no data")
    m = len(others)
    out = np.empty(samples)
    for start in range(0, samples, chunk):
        c = min(chunk, samples - start)
        ks = rng.integers(0, m + 1, c)
        order = np.argsort(rng.random((c, m)), axis=1)
        csum = np.concatenate([np.zeros((c, 1), dtype=np.int64),
                               np.cumsum(others[order], axis=1)], axis=1)
        out[start:start + c] = csum[np.arange(c), ks] / total
    return out


def convergence_experiment(I: int, sizes: Union[SizeDistribution, Sequence[int]], samples: int,
                           seed: int, bins: int = 50) -> ConvergenceResult:
    """Histogram and KS distance to ``U[0, 1]`` of the normalised coalition size."""
    if I < 2:
        raise ValueError("I must be >= 2")
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    rng = substream(seed, I)
    if isinstance(sizes, SizeDistribution):
        sizes = sizes.draw(I, rng).sizes
    if len(sizes) != I:
        raise ValueError("sizes do not match I")
    x = normalized_coalition_sizes(sizes, samples, rng)
    hist, edges = np.histogram(x, bins=bins, range=(0.0, 1.0))
    ks = float(stats.kstest(x, "uniform").statistic)
    return ConvergenceResult(I, samples, ks, hist, edges)


def _bounds_point(I: int, n_max: int, draws: int, delta: float, seed: int) -> tuple:
    rng = substream(seed, I)
    du, mc = [], []
    for _ in range(draws):
        g = GameSpec(tuple(int(v) for v in rng.integers(1, n_max + 1, I)))
        w = knee_utility(g.total)
        rho = estimate_rho(w, rho_grid(g.total, 256))
        du.append(float(np.mean(du_bias_bounds(w, g, rho))))
        mc.append(mc_error_at_budget(w(g.total), I, delta))
    return (I, math.fsum(du) / draws, math.fsum(mc) / draws)


def bounds_experiment(I_grid: Sequence[int], n_max: int = 100, draws: int = 100,
                      delta: float = 0.1, seed: int = 0, threads: int = 1) -> list[tuple]:
    """Player-averaged DU bias bound and MC error at ``T = I``, averaged over
    ``draws`` size vectors ``~ U{1..n_max}`` for each ``I``."""
    if any(I < 2 for I in I_grid):
        raise ValueError("every I must be >= 2")

    def point(I):
        return _bounds_point(I, n_max, draws, delta, seed)

    if threads <= 1:
        return [point(I) for I in I_grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(point, I_grid))


def crossing_index(rows: Sequence[tuple]) -> Optional[int]:
    """First ``I`` from which the DU curve stays below the MC curve."""
    crossing = None
    for I, du, mc in rows:
        if du < mc:
            crossing = I if crossing is None else crossing
        else:
            crossing = None
    return crossing


def manifest(config: dict, seed: Optional[int]) -> dict:
    return {"tool": "dushap", "version": __version__, "seed": seed, "config": config}


def _native(v):
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _plain(v):
    v = _native(v)
    return repr(v) if isinstance(v, float) else v


def render(header: Sequence[str], rows: Iterable[Sequence], meta: dict, fmt: str = "csv") -> str:
    """CSV with ``#`` comment header, or a JSON document with the same content.

    The version sits on its own comment line so reruns can be compared
    byte-for-byte with that line excluded.
    """
    rows = [list(r) for r in rows]
    if fmt == "json":
        body = {"manifest": meta, "columns": list(header),
                "rows": [[_native(v) for v in r] for r in rows]}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    meta = dict(meta)
    buf.write(f"# version: {meta.pop('version', '')}\n")
    buf.write(f"# manifest: {json.dumps(meta, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_plain(v) for v in r])
    return buf.getvalue()
