"""Exact ROC/AUC and rank-window partial AUC estimators.

Negatives are ranked by score descending and positives by score ascending;
ties are broken by original index so the selected window is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoreSet:
    pos_scores: np.ndarray
    neg_scores: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pos_scores, dtype=np.float64).ravel()
        n = np.asarray(self.neg_scores, dtype=np.float64).ravel()
        if p.size == 0 or n.size == 0:
            raise ValueError("degenerate class: empty positive or negative scores")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(n))):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "pos_scores", p)
        object.__setattr__(self, "neg_scores", n)

    @property
    def n_pos(self) -> int:
        return self.pos_scores.size

    @property
    def n_neg(self) -> int:
        return self.neg_scores.size


def _as_scoreset(scores, neg=None) -> ScoreSet:
    if isinstance(scores, ScoreSet):
        return scores
    return ScoreSet(scores, neg)


def _count_greater(pos, neg_sorted):
    """Number of (i, j) with pos[i] > neg[j]; ``neg_sorted`` ascending."""
    return int(np.searchsorted(neg_sorted, pos, side="left").sum())


def _count_ties(pos, neg_sorted):
    lo = np.searchsorted(neg_sorted, pos, side="left")
    hi = np.searchsorted(neg_sorted, pos, side="right")
    return int((hi - lo).sum())


def roc_auc(scores, neg=None) -> float:
    """Fraction of correctly ordered pairs, ties counted as one half."""
    ss = _as_scoreset(scores, neg)
    neg_sorted = np.sort(ss.neg_scores)
    gt = _count_greater(ss.pos_scores, neg_sorted)
    ties = _count_ties(ss.pos_scores, neg_sorted)
    return (gt + 0.5 * ties) / (ss.n_pos * ss.n_neg)


def top_negatives(neg_scores, start, stop):
    """Indices of negatives at descending ranks ``start+1 .. stop``."""
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    order = np.lexsort((np.arange(neg_scores.size), -neg_scores))
    return order[start:stop]


def bottom_positives(pos_scores, k):
    """Indices of the ``k`` lowest-scored positives (index tiebreak)."""
    pos_scores = np.asarray(pos_scores, dtype=np.float64)
    order = np.lexsort((np.arange(pos_scores.size), pos_scores))
    return order[:k]


def opauc_window(n_neg: int, alpha0: float, alpha1: float):
    if not 0 <= alpha0 < alpha1 <= 1:
        raise ValueError("need 0 <= alpha0 < alpha1 <= 1")
    # a small slack keeps 0.3 * 10 from flooring to 2
    k1 = math.ceil(n_neg * alpha0 - 1e-9)
    k2 = math.floor(n_neg * alpha1 + 1e-9)
    if k1 >= k2:
        raise ValueError(f"empty FPR window: k1={k1} >= k2={k2}")
    return k1, k2


def tpauc_window(n_pos: int, n_neg: int, alpha: float, beta: float):
    k1 = math.floor(n_pos * alpha + 1e-9)
    k2 = math.floor(n_neg * beta + 1e-9)
    if k1 < 1 or k2 < 1:
        raise ValueError(f"empty selection window: k1={k1}, k2={k2}")
    return k1, k2


def opauc_exact(scores, alpha0: float = 0.0, alpha1: float = 1.0, normalized: bool = True) -> float:
    """One-way partial AUC over negatives ranked ``k1+1 .. k2`` by score.

    With ``normalized=False`` the count is divided by ``n_+ n_-``, otherwise
    by the number of pairs in the window so the value lies in [0, 1].
    """
    ss = _as_scoreset(scores)
    k1, k2 = opauc_window(ss.n_neg, alpha0, alpha1)
    sel = ss.neg_scores[top_negatives(ss.neg_scores, k1, k2)]
    count = _count_greater(ss.pos_scores, np.sort(sel))
    denom = ss.n_pos * (k2 - k1) if normalized else ss.n_pos * ss.n_neg
    return count / denom


def tpauc_exact(scores, alpha: float, beta: float, normalized: bool = True) -> float:
    """Two-way partial AUC: bottom ``floor(n_+ alpha)`` positives x top ``floor(n_- beta)`` negatives."""
    ss = _as_scoreset(scores)
    k1, k2 = tpauc_window(ss.n_pos, ss.n_neg, alpha, beta)
    pos = ss.pos_scores[bottom_positives(ss.pos_scores, k1)]
    neg = ss.neg_scores[top_negatives(ss.neg_scores, 0, k2)]
    count = _count_greater(pos, np.sort(neg))
    denom = k1 * k2 if normalized else ss.n_pos * ss.n_neg
    return count / denom


def model_scoreset(model, data) -> ScoreSet:
    return ScoreSet(model.scores(data.X_pos), model.scores(data.X_neg))
