"""Synthetic imbalanced datasets, CSV ingestion, stratified splits and batch samplers."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

PRESETS = ("separable", "overlap", "hard_negatives")


@dataclass
class LabeledDataset:
    """Feature matrix with +1/-1 labels.

    ``pos_ids`` / ``neg_ids`` are row indices into ``features``; they are the
    stable ids used to address per-positive optimizer state.
    """

    features: np.ndarray
    labels: np.ndarray
    pos_ids: np.ndarray = field(init=False)
    neg_ids: np.ndarray = field(init=False)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.size:
            raise ValueError("features must be (n, d) with one label per row")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must be +1 or -1")
        self.pos_ids = np.flatnonzero(self.labels == 1)
        self.neg_ids = np.flatnonzero(self.labels == -1)
        # slot of each positive inside pos_ids, -1 for negatives
        self._pos_slot = np.full(self.labels.size, -1, dtype=np.int64)
        self._pos_slot[self.pos_ids] = np.arange(self.pos_ids.size)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_pos(self) -> int:
        return self.pos_ids.size

    @property
    def n_neg(self) -> int:
        return self.neg_ids.size

    @property
    def X_pos(self) -> np.ndarray:
        return self.features[self.pos_ids]

    @property
    def X_neg(self) -> np.ndarray:
        return self.features[self.neg_ids]

    def pos_slots(self, ids) -> np.ndarray:
        """Map global positive ids to their 0..n_+-1 state slots."""
        slots = self._pos_slot[np.asarray(ids, dtype=np.int64)]
        if np.any(slots < 0):
            raise ValueError("id is not a positive example")
        return slots

    def subset(self, ids) -> "LabeledDataset":
        ids = np.asarray(ids, dtype=np.int64)
        return LabeledDataset(self.features[ids], self.labels[ids])

    @classmethod
    def from_classes(cls, X_pos, X_neg) -> "LabeledDataset":
        X_pos = np.atleast_2d(np.asarray(X_pos, dtype=np.float64))
        X_neg = np.atleast_2d(np.asarray(X_neg, dtype=np.float64))
        X = np.vstack([X_pos, X_neg])
        y = np.concatenate([np.ones(len(X_pos), dtype=np.int64), -np.ones(len(X_neg), dtype=np.int64)])
        return cls(X, y)


def standardize(X: np.ndarray) -> np.ndarray:
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


@dataclass
class SynthSpec:
    """Recipe for a synthetic imbalanced dataset.

    ``sigma`` controls class overlap for the ``overlap`` preset; ``hard_frac``
    and ``hard_shift`` place a fraction of negatives beyond the positive mean
    along the main axis (``hard_negatives`` preset).
    """

    n: int = 2000
    pos_frac: float = 0.1
    d: int = 10
    preset: str = "overlap"
    sigma: float = 1.0
    hard_frac: float = 0.05
    hard_shift: float = 6.0
    seed: int = 0

    def counts(self):
        n_pos = int(round(self.n * self.pos_frac))
        return n_pos, self.n - n_pos


def generate(spec: SynthSpec) -> LabeledDataset:
    if spec.preset not in PRESETS:
        raise ValueError(f"unknown preset {spec.preset!r}")
    if not 0 < spec.pos_frac < 1 or spec.d < 2:
        raise ValueError("need 0 < pos_frac < 1 and d >= 2")
    n_pos, n_neg = spec.counts()
    if n_pos < 1 or n_neg < 1:
        raise ValueError(f"infeasible counts: n_pos={n_pos}, n_neg={n_neg}")
    rng = np.random.default_rng(spec.seed)
    d = spec.d
    e1 = np.zeros(d)
    e1[0] = 1.0

    if spec.preset == "separable":
        # unit-variance clouds, margin enforced along e1
        Xp = rng.normal(size=(n_pos, d))
        Xn = rng.normal(size=(n_neg, d))
        Xp[:, 0] = 1.0 + np.abs(Xp[:, 0])
        Xn[:, 0] = -1.0 - np.abs(Xn[:, 0])
    elif spec.preset == "overlap":
        Xp = rng.normal(scale=spec.sigma, size=(n_pos, d)) + 1.0 * e1
        Xn = rng.normal(scale=spec.sigma, size=(n_neg, d)) - 1.0 * e1
    else:
        # hard negatives sit hard_shift beyond the positive mean on e1, where
        # no linear direction can rank them below the positives; losses that
        # grow without bound in the score (CE on logits) get dragged by them,
        # while a low-FPR objective treats them as a fixed cost
        Xp = rng.normal(size=(n_pos, d))
        Xp[:, 0] += 2.5
        Xp[:, 1] += 1.25
        Xn = rng.normal(size=(n_neg, d))
        n_hard = int(round(spec.hard_frac * n_neg))
        if n_hard:
            hard = rng.choice(n_neg, size=n_hard, replace=False)
            Xn[hard, 0] = rng.normal(loc=2.5 + spec.hard_shift, scale=0.5, size=n_hard)
    X = standardize(np.vstack([Xp, Xn]))
    y = np.concatenate([np.ones(n_pos, dtype=np.int64), -np.ones(n_neg, dtype=np.int64)])
    perm = rng.permutation(X.shape[0])
    return LabeledDataset(X[perm], y[perm])


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def load_csv(path, label_column="label", positive_label="1", standardize_features=True) -> LabeledDataset:
    """Read a comma-separated file; rows whose label equals ``positive_label`` become +1.

    ``label_column`` is a header name, or an integer column index for files
    without a header.  The header is detected by a non-numeric first row.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    by_name = isinstance(label_column, str) and not label_column.lstrip("-").isdigit()
    first = rows[0][1]
    width = len(first)
    if by_name:
        lab = None
    else:
        lab = int(label_column)
        if not -width <= lab < width:
            raise ValueError(f"{path}: missing label column {label_column!r}")
        lab %= width
    # text labels are allowed, so only feature cells can mark a header row
    header = None
    if not _all_numeric(c for k, c in enumerate(first) if k != lab):
        header = [c.strip() for c in first]
        rows = rows[1:]
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    if by_name:
        if header is None or label_column not in header:
            raise ValueError(f"{path}: missing label column {label_column!r}")
        lab = header.index(label_column)
    feats, labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        vals = []
        for k, cell in enumerate(row):
            if k == lab:
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric cell {cell!r} in column {k}") from None
        feats.append(vals)
        labels.append(1 if _label_match(row[lab], positive_label) else -1)
    X = np.array(feats, dtype=np.float64)
    if standardize_features:
        X = standardize(X)
    return LabeledDataset(X, np.array(labels, dtype=np.int64))


def _all_numeric(row):
    try:
        [float(c) for c in row]
    except ValueError:
        return False
    return True


def _label_match(cell, positive_label) -> bool:
    cell = cell.strip()
    if cell == str(positive_label).strip():
        return True
    try:
        return float(cell) == float(positive_label)
    except ValueError:
        return False


def write_csv(data: LabeledDataset, path, label_column="label"):
    """Write features and +1/-1 labels with full float precision."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(data.d)] + [label_column])
        for x, y in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


# ---------------------------------------------------------------------------
# splitting and sampling
# ---------------------------------------------------------------------------


def split(data: LabeledDataset, train_frac=0.8, val_frac=0.1, seed=0):
    """Stratified train/val/test split; the test part gets the remainder."""
    if not (0 < train_frac < 1 and 0 <= val_frac < 1 and train_frac + val_frac <= 1 + 1e-12):
        raise ValueError("fractions must lie in (0, 1) and sum to at most 1")
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for ids in (data.pos_ids, data.neg_ids):
        ids = rng.permutation(ids)
        n_tr = int(round(train_frac * ids.size))
        n_va = int(round(val_frac * ids.size))
        parts[0].append(ids[:n_tr])
        parts[1].append(ids[n_tr:n_tr + n_va])
        parts[2].append(ids[n_tr + n_va:])
    out = []
    for name, chunks in zip(("train", "val", "test"), parts):
        ids = np.sort(np.concatenate(chunks))
        sub = data.subset(ids)
        if ids.size and (sub.n_pos == 0 or sub.n_neg == 0):
            raise ValueError(f"{name} split has an empty class")
        if name == "train" and ids.size == 0:
            raise ValueError("train split is empty")
        out.append(sub)
    return tuple(out)


class BatchSampler:
    """Per-class shuffled epochs without replacement.

    The positive stream defines the epoch: ``steps_per_epoch`` batches cover
    every positive once (the last batch is topped up from the next shuffle).
    The negative stream reshuffles independently whenever it runs out.
    Yields ``(pos_ids, neg_ids)`` as global ids.
    """

    def __init__(self, data: LabeledDataset, batch_pos: int, batch_neg: int, seed=0):
        if not (1 <= batch_pos <= data.n_pos and 1 <= batch_neg <= data.n_neg):
            raise ValueError(
                f"invalid batch sizes ({batch_pos}, {batch_neg}) for class sizes ({data.n_pos}, {data.n_neg})"
            )
        self.data = data
        self.batch_pos = batch_pos
        self.batch_neg = batch_neg
        ss = np.random.SeedSequence(seed)
        pos_seq, neg_seq = ss.spawn(2)
        self._rng_pos = np.random.default_rng(pos_seq)
        self._rng_neg = np.random.default_rng(neg_seq)
        self._pos_queue = np.empty(0, dtype=np.int64)
        self._neg_queue = np.empty(0, dtype=np.int64)

    @property
    def steps_per_epoch(self) -> int:
        return math.ceil(self.data.n_pos / self.batch_pos)

    @staticmethod
    def _draw(queue, ids, k, rng):
        while queue.size < k:
            queue = np.concatenate([queue, rng.permutation(ids)])
        return queue[:k], queue[k:]

    def next_batch(self):
        pos, self._pos_queue = self._draw(self._pos_queue, self.data.pos_ids, self.batch_pos, self._rng_pos)
        neg, self._neg_queue = self._draw(self._neg_queue, self.data.neg_ids, self.batch_neg, self._rng_neg)
        return pos, neg

    def epoch(self):
        for _ in range(self.steps_per_epoch):
            yield self.next_batch()

    def __iter__(self):
        while True:
            yield self.next_batch()


def batch_sampler(data, batch_pos, batch_neg, seed=0):
    """Infinite stream of ``(pos_batch, neg_batch)`` global-id arrays."""
    return iter(BatchSampler(data, batch_pos, batch_neg, seed))
