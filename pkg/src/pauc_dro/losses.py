"""Pairwise surrogate losses, DRO closed forms and full-batch pAUC objectives.

All objectives take a :class:`~pauc_dro.model.ScoreModel` and a dataset
exposing ``X_pos`` / ``X_neg`` feature matrices.  Scalar values are summed
with :func:`math.fsum` so that reordering the pairs does not move the result
beyond rounding of the final division.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import sigmoid

LOSS_KINDS = ("squared_hinge", "logistic")


@dataclass(frozen=True)
class PairwiseLossSpec:
    kind: str = "squared_hinge"
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown surrogate {self.kind!r}")
        if not self.c > 0:
            raise ValueError("surrogate parameter c must be positive")


def pairwise_loss(spec: PairwiseLossSpec, margin):
    """Return ``(l(margin), l'(margin))``; works elementwise on arrays."""
    m = np.asarray(margin, dtype=np.float64)
    if spec.kind == "squared_hinge":
        gap = np.maximum(spec.c - m, 0.0)
        val, der = gap * gap, -2.0 * gap
    else:
        z = -m / spec.c
        val = np.logaddexp(0.0, z)
        der = -sigmoid(z) / spec.c
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


def _fsum(a) -> float:
    return math.fsum(np.asarray(a, dtype=np.float64).ravel())


def _integral(x: float, what: str) -> int:
    k = int(round(x))
    if k < 1 or abs(x - k) > 1e-9:
        raise ValueError(f"{what} not integral: {x!r}")
    return k


def dro_cvar(losses, gamma: float) -> float:
    """Average of the top ``n*gamma`` losses (n*gamma must be an integer)."""
    losses = np.asarray(losses, dtype=np.float64).ravel()
    n = losses.size
    k = _integral(n * gamma, "CVaR level")
    if k > n:
        raise ValueError("CVaR level not integral: n*gamma exceeds n")
    top = np.sort(losses)[::-1][:k]
    return _fsum(top) / k


def dro_kl(losses, lam: float) -> float:
    """KL-regularized DRO loss ``lam * log(mean(exp(losses / lam)))``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    losses = np.asarray(losses, dtype=np.float64).ravel()
    m = losses.max()
    return float(m + lam * math.log(_fsum(np.exp((losses - m) / lam)) / losses.size))


def cvar_variational(losses, gamma: float, s: float) -> float:
    """``s + 1/(n gamma) * sum (l_i - s)_+`` at a given threshold ``s``."""
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    losses = np.asarray(losses, dtype=np.float64).ravel()
    return float(s) + _fsum(np.maximum(losses - s, 0.0)) / (losses.size * gamma)


# ---------------------------------------------------------------------------
# pair matrices
# ---------------------------------------------------------------------------


def pair_terms(model, w, X_pos, X_neg, spec, with_grad=True):
    """Loss matrix L[i, j] = l(h(x_i) - h(x_j)) for positives i, negatives j.

    Returns ``(L, D, J_pos, J_neg)`` where ``D`` holds l' at each margin and
    the ``J`` are score Jacobians; without ``with_grad`` only ``L``.
    """
    if with_grad:
        hp, Jp = model.scores_at(w, X_pos, with_grad=True)
        hn, Jn = model.scores_at(w, X_neg, with_grad=True)
    else:
        hp = model.scores_at(w, X_pos)
        hn = model.scores_at(w, X_neg)
    L, D = pairwise_loss(spec, hp[:, None] - hn[None, :])
    L, D = np.atleast_2d(L), np.atleast_2d(D)
    if not with_grad:
        return L
    return L, D, Jp, Jn


def weighted_pair_grad(G, Jp, Jn):
    """Gradient of sum_ij c_ij L_ij given ``G = c * l'`` (elementwise)."""
    return Jp.T @ G.sum(axis=1) - Jn.T @ G.sum(axis=0)


def _check_classes(data):
    if len(data.X_pos) == 0 or len(data.X_neg) == 0:
        raise ValueError("degenerate class: need at least one positive and one negative")


def _row_softmax(A, lam):
    m = A.max(axis=1, keepdims=True)
    E = np.exp((A - m) / lam)
    S = E.sum(axis=1, keepdims=True)
    # log mean exp(A / lam) per row, in units of 1/lam
    log_mean = m[:, 0] / lam + np.log(S[:, 0] / A.shape[1])
    return E / S, log_mean


# ---------------------------------------------------------------------------
# OPAUC objectives
# ---------------------------------------------------------------------------


def mean_pairwise_loss(model, data, spec) -> float:
    _check_classes(data)
    L = pair_terms(model, model.params, data.X_pos, data.X_neg, spec, with_grad=False)
    return _fsum(L) / L.size


def opauc_cvar_objective(model, data, spec, beta, s) -> float:
    """F(w, s) = mean_i (s_i + psi_i(w, s_i) / beta) at given thresholds."""
    _check_classes(data)
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    L = pair_terms(model, model.params, data.X_pos, data.X_neg, spec, with_grad=False)
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), (L.shape[0],))
    hinge = np.maximum(L - s[:, None], 0.0)
    n_pos, n_neg = L.shape
    return (_fsum(s) + _fsum(hinge) / (beta * n_neg)) / n_pos


def opauc_cvar_objective_and_grad(model, data, spec, beta, s):
    """F(w, s) with the subgradients in w and s (indicator ``I(L - s > 0)`` at kinks)."""
    _check_classes(data)
    L, D, Jp, Jn = pair_terms(model, model.params, data.X_pos, data.X_neg, spec)
    n_pos, n_neg = L.shape
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), (n_pos,)).copy()
    active = (L - s[:, None]) > 0
    hinge = np.where(active, L - s[:, None], 0.0)
    value = (_fsum(s) + _fsum(hinge) / (beta * n_neg)) / n_pos
    g_w = weighted_pair_grad(active * D, Jp, Jn) / (beta * n_pos * n_neg)
    g_s = (1.0 - active.sum(axis=1) / (beta * n_neg)) / n_pos
    return value, g_w, g_s


def opauc_cvar_min(model, data, spec, beta):
    """min over s of F(w, s) and the minimizing thresholds.

    The per-positive minimizer is the ceil(n_- beta)-th largest loss of that
    positive's row; this holds for any beta, not only integral levels.
    """
    _check_classes(data)
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    L = pair_terms(model, model.params, data.X_pos, data.X_neg, spec, with_grad=False)
    n_pos, n_neg = L.shape
    k = min(n_neg, max(1, math.ceil(n_neg * beta - 1e-9)))
    s_star = -np.sort(-L, axis=1)[:, k - 1]
    hinge = np.maximum(L - s_star[:, None], 0.0)
    value = (_fsum(s_star) + _fsum(hinge) / (beta * n_neg)) / n_pos
    return value, s_star


def opauc_topk_surrogate(model, data, spec, beta) -> float:
    """Mean over positives of the average loss on the top n_- beta negatives.

    Negatives are ranked by score (descending, index tiebreak), so this is
    the surrogate that counts only the highest-scored negatives.
    """
    _check_classes(data)
    n_neg = len(data.X_neg)
    k = _integral(n_neg * beta, "FPR budget n_- * beta")
    hn = model.scores(data.X_neg)
    order = np.lexsort((np.arange(n_neg), -hn))[:k]
    L = pair_terms(model, model.params, data.X_pos, data.X_neg[order], spec, with_grad=False)
    return _fsum(L) / L.size


def opauc_kl_objective_and_grad(model, data, spec, lam):
    """(1/n_+) sum_i lam log E_j exp(L_ij / lam) and its gradient."""
    _check_classes(data)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    L, D, Jp, Jn = pair_terms(model, model.params, data.X_pos, data.X_neg, spec)
    P, log_mean = _row_softmax(L, lam)
    n_pos = L.shape[0]
    value = lam * _fsum(log_mean) / n_pos
    grad = weighted_pair_grad(P * D, Jp, Jn) / n_pos
    return value, grad


def opauc_kl_weights(model, data, spec, lam):
    """Per-pair softmax weights of the KL objective (rows sum to one)."""
    L = pair_terms(model, model.params, data.X_pos, data.X_neg, spec, with_grad=False)
    return _row_softmax(L, lam)[0]


# ---------------------------------------------------------------------------
# TPAUC objectives
# ---------------------------------------------------------------------------


def tpauc_kl_objective_and_grad(model, data, spec, lam, lam_prime):
    """lam' log E_i (E_j exp(L_ij / lam))^(lam / lam') and its gradient."""
    _check_classes(data)
    if not (lam > 0 and lam_prime > 0):
        raise ValueError("lambda and lambda_prime must be positive")
    L, D, Jp, Jn = pair_terms(model, model.params, data.X_pos, data.X_neg, spec)
    R, log_g = _row_softmax(L, lam)
    b = log_g * (lam / lam_prime)
    bm = b.max()
    q = np.exp(b - bm)
    qs = math.fsum(q)
    value = lam_prime * (bm + math.log(qs / b.size))
    grad = weighted_pair_grad((q / qs)[:, None] * R * D, Jp, Jn)
    return value, grad


def _select(scores, k, descending):
    n = scores.size
    key = -scores if descending else scores
    return np.lexsort((np.arange(n), key))[:k]


def tpauc_cvar_objective(model, data, spec, alpha, beta, strict=True) -> float:
    """Mean surrogate over the K1 lowest-scored positives x K2 highest-scored negatives.

    K1 = n_+ alpha and K2 = n_- beta must be integers; with ``strict=False``
    they are floored instead (at least 1), for monitoring arbitrary splits.
    """
    _check_classes(data)
    if strict:
        k1 = _integral(len(data.X_pos) * alpha, "K1 = n_+ * alpha")
        k2 = _integral(len(data.X_neg) * beta, "K2 = n_- * beta")
    else:
        k1 = max(1, math.floor(len(data.X_pos) * alpha + 1e-9))
        k2 = max(1, math.floor(len(data.X_neg) * beta + 1e-9))
    hp = model.scores(data.X_pos)
    hn = model.scores(data.X_neg)
    ip = _select(hp, k1, descending=False)
    jn = _select(hn, k2, descending=True)
    L, _ = pairwise_loss(spec, hp[ip][:, None] - hn[jn][None, :])
    return _fsum(L) / L.size


def tpauc_minmax_objective(model, data, spec, alpha, beta, s, pi, u) -> float:
    """pi + 1/(n_+ alpha) sum_i u_i (s_i + psi_i(w, s_i)/beta - pi)."""
    _check_classes(data)
    L = pair_terms(model, model.params, data.X_pos, data.X_neg, spec, with_grad=False)
    n_pos, n_neg = L.shape
    s = np.asarray(s, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    psi = np.maximum(L - s[:, None], 0.0).sum(axis=1) / n_neg
    inner = s + psi / beta - pi
    return float(pi) + _fsum(u * inner) / (n_pos * alpha)


def cross_entropy(model, data) -> float:
    """Mean binary cross-entropy of sigmoid(logit) over all examples."""
    zp = model.logits_at(model.params, data.X_pos)
    zn = model.logits_at(model.params, data.X_neg)
    total = _fsum(np.logaddexp(0.0, -zp)) + _fsum(np.logaddexp(0.0, zn))
    return total / (zp.size + zn.size)
