"""Dataset valuation on tabular data.

Rows of a CSV file are split across players plus a hold-out set. A
coalition's utility is the hold-out score of a small model trained by a
fixed number of SGD steps on the pooled rows. Because DU estimators need
``w`` at sizes no coalition realises, :class:`EmpiricalCardinalProxy`
evaluates it on uniform random subsets of the other players' pooled rows.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .estimators import derive_seed, substream
from .game_core import CardinalUtility, GameSpec, SetUtility, normalize_utility

log = logging.getLogger(__name__)


class Task(enum.Enum):
    CLASSIFICATION = "clf"
    REGRESSION = "reg"


class ModelKind(enum.Enum):
    LOGISTIC = "logistic"
    LINEAR = "linear"

    @classmethod
    def for_task(cls, task: Task) -> "ModelKind":
        return cls.LOGISTIC if task is Task.CLASSIFICATION else cls.LINEAR


@dataclass
class TabularDataset:
    features: np.ndarray
    labels: np.ndarray
    column_names: list[str]
    task: Task = Task.CLASSIFICATION
    dropped_rows: int = 0

    @property
    def n_rows(self) -> int:
        return len(self.labels)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path: Union[str, Path], label_column: str,
             task: Union[Task, str] = Task.CLASSIFICATION) -> TabularDataset:
    """Read a headed CSV into standardised numeric features and labels.

    A column is numeric when most of its non-empty cells parse as floats;
    other columns are one-hot encoded in first-appearance order. Rows with
    empty cells, a wrong field count or a non-numeric value in a numeric
    column are dropped and counted.
    """
    task = Task(task)
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        raw = [row for row in reader if row]
    if label_column not in header:
        raise KeyError(f"label column {label_column!r} not in {header}")

    n_cols = len(header)
    shaped = [[c.strip() for c in row] for row in raw if len(row) == n_cols]
    dropped = len(raw) - len(shaped)
    numeric = []
    for j in range(n_cols):
        cells = [row[j] for row in shaped if row[j]]
        numeric.append(bool(cells) and sum(map(_is_float, cells)) * 2 > len(cells))

    rows = []
    for row in shaped:
        if any(not c for c in row) or any(numeric[j] and not _is_float(row[j])
                                           for j in range(n_cols)):
            dropped += 1
            continue
        rows.append(row)
    if not rows:
        raise ValueError(f"{path} has no usable rows")
    if dropped:
        log.warning("dropped %d malformed rows from %s", dropped, path)

    label_idx = header.index(label_column)
    labels = _encode_labels([row[label_idx] for row in rows], numeric[label_idx], task)
    columns, names = [], []
    for j, name in enumerate(header):
        if j == label_idx:
            continue
        if numeric[j]:
            columns.append(np.array([float(row[j]) for row in rows]))
            names.append(name)
        else:
            cats = list(dict.fromkeys(row[j] for row in rows))
            for cat in cats:
                columns.append(np.array([row[j] == cat for row in rows], dtype=np.float64))
                names.append(f"{name}={cat}")
    features = np.column_stack(columns) if columns else np.zeros((len(rows), 0))
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    features = (features - mean) / np.where(std > 0, std, 1.0)
    return TabularDataset(features, labels, names, task, dropped)


def _encode_labels(cells: list[str], numeric: bool, task: Task) -> np.ndarray:
    if task is Task.REGRESSION:
        if not numeric:
            raise ValueError("regression labels must be numeric")
        return np.array([float(c) for c in cells])
    if numeric:
        labels = np.array([float(c) for c in cells])
        if not np.all(np.isin(labels, (0.0, 1.0))):
            raise ValueError("classification labels must be 0 or 1")
        return labels
    cats = sorted(set(cells))
    if len(cats) != 2:
        raise ValueError(f"expected two label classes, found {len(cats)}")
    return np.array([float(c == cats[1]) for c in cells])


@dataclass(frozen=True)
class Partition:
    player_indices: tuple[np.ndarray, ...]
    holdout_indices: np.ndarray


def partition(data: TabularDataset, g: GameSpec, seed: int,
              holdout_fraction: float = 0.10) -> Partition:
    """Uniform random assignment of rows to players and a hold-out set."""
    n_total = data.n_rows
    n_hold = int(round(holdout_fraction * n_total))
    if n_hold < 1:
        raise ValueError("hold-out set would be empty")
    if g.total + n_hold > n_total:
        raise ValueError(f"need {g.total + n_hold} rows, dataset has {n_total}")
    order = substream(seed, 7).permutation(n_total)
    holdout = order[:n_hold]
    cuts = np.cumsum((n_hold,) + g.sizes)
    players = tuple(order[a:b] for a, b in zip(cuts[:-1], cuts[1:]))
    return Partition(players, holdout)


@dataclass(frozen=True)
class TrainedModel:
    kind: ModelKind
    weights: np.ndarray
    train_steps: int
    learning_rate: float

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights[:-1] + self.weights[-1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        z = self.decision(X)
        if self.kind is ModelKind.LOGISTIC:
            return (_sigmoid(z) > 0.5).astype(np.float64)
        return z


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def zero_model(kind: ModelKind, d: int) -> TrainedModel:
    return TrainedModel(kind, np.zeros(d + 1), 0, 0.0)


def train(kind: Union[ModelKind, str], X: np.ndarray, y: np.ndarray, steps: int = 20,
          learning_rate: float = 0.1, seed: int = 0, batch_size: int = 32) -> TrainedModel:
    """Minibatch SGD from zero weights for a fixed number of steps."""
    kind = ModelKind(kind)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("cannot train on an empty set")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = substream(seed)
    Xb = np.hstack([X, np.ones((n, 1))])
    wts = np.zeros(Xb.shape[1])
    b = min(batch_size, n)
    for _ in range(steps):
        idx = rng.choice(n, size=b, replace=False)
        z = Xb[idx] @ wts
        residual = (_sigmoid(z) if kind is ModelKind.LOGISTIC else z) - y[idx]
        wts = wts - learning_rate * (Xb[idx].T @ residual) / b
    if not np.all(np.isfinite(wts)):
        raise FloatingPointError("SGD diverged; lower the learning rate")
    return TrainedModel(kind, wts, steps, learning_rate)


def evaluate(model: TrainedModel, X: np.ndarray, y: np.ndarray,
             task: Union[Task, str, None] = None) -> float:
    """Accuracy for classification, negative MSE for regression."""
    if len(y) == 0:
        raise ValueError("hold-out set is empty")
    task = Task(task) if task is not None else (
        Task.CLASSIFICATION if model.kind is ModelKind.LOGISTIC else Task.REGRESSION)
    pred = model.predict(X)
    if task is Task.CLASSIFICATION:
        return float(np.mean(pred == y))
    return -float(np.mean((pred - y) ** 2))


class EmpiricalGame:
    """Shared state for the set utility and the per-player cardinal proxies.

    Scores are cached by row set, so every coalition trains once.
    """

    def __init__(self, data: TabularDataset, part: Partition,
                 kind: Union[ModelKind, str, None] = None, seed: int = 0, steps: int = 20,
                 learning_rate: float = 0.1):
        self.data = data
        self.part = part
        self.kind = ModelKind(kind) if kind is not None else ModelKind.for_task(data.task)
        self.seed = seed
        self.steps = steps
        self.learning_rate = learning_rate
        self.game = GameSpec(tuple(len(p) for p in part.player_indices))
        self._hold_X = data.features[part.holdout_indices]
        self._hold_y = data.labels[part.holdout_indices]
        self.zero_score = evaluate(zero_model(self.kind, data.features.shape[1]),
                                   self._hold_X, self._hold_y, data.task)
        self._cache: dict[tuple, float] = {}
        self._lock = threading.Lock()

    def score_rows(self, rows: np.ndarray, key: tuple, train_seed: int) -> float:
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        if len(rows) == 0:
            value = self.zero_score
        else:
            model = train(self.kind, self.data.features[rows], self.data.labels[rows],
                          self.steps, self.learning_rate, train_seed)
            value = evaluate(model, self._hold_X, self._hold_y, self.data.task)
        with self._lock:
            self._cache[key] = value
        return value

    def coalition_rows(self, mask: int) -> np.ndarray:
        parts = [p for i, p in enumerate(self.part.player_indices) if mask >> i & 1]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def coalition_score(self, mask: int) -> float:
        return self.score_rows(self.coalition_rows(mask), ("S", mask),
                               derive_seed(self.seed, 1, *_mask_words(mask)))

    def set_utility(self) -> SetUtility:
        return normalize_utility(SetUtility(self.coalition_score, self.game.n_players,
                                            "empirical"))

    def cardinal_proxy(self, i: int, m_draws: int = 1) -> "EmpiricalCardinalProxy":
        return EmpiricalCardinalProxy(self, i, m_draws)


def _mask_words(mask: int) -> tuple[int, ...]:
    words = []
    while True:
        words.append(mask & 0xFFFFFFFF)
        mask >>= 32
        if not mask:
            return tuple(words)


class EmpiricalCardinalProxy(CardinalUtility):
    """``w`` for player ``i`` realised on random subsets of the other players' rows.

    ``w(n)`` trains on ``round(n)`` rows drawn without replacement from the
    pool. ``delta(base, n_i)`` scores the same drawn subset with and without
    player ``i``'s own rows. A subset of the full pool size or of size zero is
    an actual coalition and reuses its cached score.
    """

    def __init__(self, game: EmpiricalGame, i: int, m_draws: int = 1):
        if m_draws < 1:
            raise ValueError("m_draws must be >= 1")
        self.g = game
        self.player = i
        self.m_draws = m_draws
        self.pool_mask = game.game.grand_mask() & ~(1 << i)
        self.pool = game.coalition_rows(self.pool_mask)
        self.own = game.part.player_indices[i]
        self.clamped = False
        super().__init__(self._w, f"proxy[{i}]")

    def _size(self, n: float) -> int:
        k = int(math.floor(n + 0.5))
        if k > len(self.pool):
            self.clamped = True
            k = len(self.pool)
        return k

    def _subset(self, k: int, draw: int) -> np.ndarray:
        rng = substream(self.g.seed, 2, self.player, k, draw)
        return self.pool[np.sort(rng.choice(len(self.pool), size=k, replace=False))]

    def _score(self, k: int, draw: int, with_own: bool) -> float:
        bit = 1 << self.player
        if k == len(self.pool):
            return self.g.coalition_score(self.pool_mask | (bit if with_own else 0))
        if k == 0:
            return self.g.coalition_score(bit if with_own else 0)
        rows = self._subset(k, draw)
        if with_own:
            rows = np.concatenate([self.own, rows])
        key = ("P", self.player, k, draw, with_own)
        return self.g.score_rows(rows, key, derive_seed(self.g.seed, 3, self.player, k, draw,
                                                        int(with_own)))

    def _draws(self, k: int) -> int:
        return 1 if k in (0, len(self.pool)) else self.m_draws

    def _w(self, n: float) -> float:
        k = self._size(n)
        reps = self._draws(k)
        return math.fsum(self._score(k, r, False) for r in range(reps)) / reps

    def delta(self, base: float, added: float) -> float:
        k = self._size(base)
        reps = self._draws(k)
        self._counter.add(2)
        return math.fsum(self._score(k, r, True) - self._score(k, r, False)
                         for r in range(reps)) / reps


def make_empirical_set_utility(data: TabularDataset, part: Partition,
                               kind: Union[ModelKind, str, None] = None, seed: int = 0,
                               steps: int = 20, learning_rate: float = 0.1) -> SetUtility:
    return EmpiricalGame(data, part, kind, seed, steps, learning_rate).set_utility()


def make_empirical_cardinal_proxy(data: TabularDataset, part: Partition, i: int,
                                  kind: Union[ModelKind, str, None] = None, m_draws: int = 1,
                                  seed: int = 0, steps: int = 20,
                                  learning_rate: float = 0.1) -> EmpiricalCardinalProxy:
    return EmpiricalGame(data, part, kind, seed, steps, learning_rate).cardinal_proxy(i, m_draws)


def synthetic_classification(n_rows: int = 5000, informative: int = 2, noise_features: int = 0,
                             seed: int = 0) -> tuple[list[str], np.ndarray]:
    """A logistic-labelled table: header plus rows (features..., label)."""
    rng = substream(seed, 11)
    X = rng.standard_normal((n_rows, informative + noise_features))
    coef = np.concatenate([np.linspace(2.0, 1.0, informative), np.zeros(noise_features)])
    p = _sigmoid(X @ coef)
    y = (rng.random(n_rows) < p).astype(np.float64)
    header = [f"x{j}" for j in range(X.shape[1])] + ["label"]
    return header, np.column_stack([X, y])


def write_csv(path: Union[str, Path], header: Sequence[str], rows: np.ndarray) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row[:-1]] + [int(row[-1])])
