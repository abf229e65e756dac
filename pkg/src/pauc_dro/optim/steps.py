"""Single-step updates for SOPA, SOPA-s, SOTA-s and the mini-batch baselines.

Every step has the same calling convention::

    step(state, hyper, model, data, pos_ids, neg_ids, loss) -> state

``model`` supplies the architecture only (parameters come from
``state.w``), ``pos_ids`` / ``neg_ids`` are global row ids of the sampled
batches.  The state is updated in place and returned.  The gradient
estimator used for the step is left in ``state.last_grad`` (before weight
decay is added it is also kept in ``state.extra["grad_estimate"]``).
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ..losses import PairwiseLossSpec, pair_terms, weighted_pair_grad
from .state import FLOOR, OptimizerState, StepHyper, apply_update

log = logging.getLogger(__name__)

DEFAULT_LOSS = PairwiseLossSpec("squared_hinge", 1.0)


def _batch(model, state, data, pos_ids, neg_ids, loss):
    pos_ids = np.asarray(pos_ids, dtype=np.int64)
    neg_ids = np.asarray(neg_ids, dtype=np.int64)
    if pos_ids.size == 0 or neg_ids.size == 0:
        raise ValueError("empty batch")
    L, D, Jp, Jn = pair_terms(model, state.w, data.features[pos_ids], data.features[neg_ids], loss)
    return data.pos_slots(pos_ids), L, D, Jp, Jn


def sopa_step(state: OptimizerState, hyper: StepHyper, model, data, pos_ids, neg_ids,
              loss: PairwiseLossSpec = DEFAULT_LOSS) -> OptimizerState:
    """Hard-weight step for the CVaR-based OPAUC objective.

    p_ij = I(L_ij - s_i > 0); sampled thresholds move by
    ``-(eta2/n_+) (1 - sum_j p_ij / (beta B_-))``, untouched otherwise.
    """
    slots, L, D, Jp, Jn = _batch(model, state, data, pos_ids, neg_ids, loss)
    beta = hyper.beta_fpr
    n_pos = state.s.size
    b_pos, b_neg = L.shape
    s_cur = state.s[slots]
    P = (L - s_cur[:, None] > 0).astype(np.float64)
    grad = weighted_pair_grad(P * D, Jp, Jn) / (beta * b_pos * b_neg)
    state.s[slots] = s_cur - (hyper.eta2 / n_pos) * (1.0 - P.sum(axis=1) / (beta * b_neg))
    state.visited[slots] = True
    state.extra["grad_estimate"] = grad
    state.extra["weights"] = P
    apply_update(state, grad, hyper.eta1, hyper.gamma1, hyper)
    return state


def sopa_s_step(state: OptimizerState, hyper: StepHyper, model, data, pos_ids, neg_ids,
                loss: PairwiseLossSpec = DEFAULT_LOSS) -> OptimizerState:
    """Soft-weight step for the KL-based OPAUC objective.

    The tracker u_i follows E_j exp(L_ij / lam); the pair weights divide by
    the freshly updated tracker (floored at 1e-12).
    """
    slots, L, D, Jp, Jn = _batch(model, state, data, pos_ids, neg_ids, loss)
    lam, g0 = hyper.lam, hyper.gamma0
    E = np.exp(L / lam)
    u_new = (1.0 - g0) * state.u[slots] + g0 * E.mean(axis=1)
    state.u[slots] = u_new
    state.visited[slots] = True
    denom = np.maximum(u_new, FLOOR)
    state.floor_hits += int(np.sum(u_new < FLOOR))
    P = E / denom[:, None]
    grad = weighted_pair_grad(P * D, Jp, Jn) / L.size
    state.extra["grad_estimate"] = grad
    state.extra["weights"] = P
    apply_update(state, grad, hyper.eta1, hyper.gamma1, hyper)
    return state


def sota_s_step(state: OptimizerState, hyper: StepHyper, model, data, pos_ids, neg_ids,
                loss: PairwiseLossSpec = DEFAULT_LOSS) -> OptimizerState:
    """Soft-weight step for the KL-KL TPAUC objective (three-level composition).

    u_i tracks g_i(w) = E_j exp(L_ij / lam) and v tracks the mean of
    u_i^(lam/lam').  Weights use the tracker values from before this step;
    a positive seen for the first time uses its fresh estimate instead.
    """
    slots, L, D, Jp, Jn = _batch(model, state, data, pos_ids, neg_ids, loss)
    lam, lamp = hyper.lam, hyper.lam_prime
    E = np.exp(L / lam)
    fresh = (1.0 - hyper.gamma0) * state.u[slots] + hyper.gamma0 * E.mean(axis=1)
    prev = np.where(state.visited[slots], state.u[slots], fresh)
    low = prev < FLOOR
    state.floor_hits += int(np.sum(low))
    prev = np.maximum(prev, FLOOR)
    power = lam / lamp
    state.v = (1.0 - hyper.gamma1) * state.v + hyper.gamma1 * float(np.mean(prev ** power))
    if state.v < FLOOR:
        state.floor_hits += 1
        v_used = FLOOR
    else:
        v_used = state.v
    P = (prev ** (power - 1.0))[:, None] * E / v_used
    grad = weighted_pair_grad(P * D, Jp, Jn) / L.size
    state.u[slots] = fresh
    state.visited[slots] = True
    state.extra["grad_estimate"] = grad
    state.extra["weights"] = P
    apply_update(state, grad, hyper.eta1, hyper.gamma2, hyper)
    return state


def _select_count(frac, size):
    return int(math.floor(frac * size + 1e-9))


def mb_baseline_step(state: OptimizerState, hyper: StepHyper, model, data, pos_ids, neg_ids,
                     loss: PairwiseLossSpec = DEFAULT_LOSS, mode: str = "opauc") -> OptimizerState:
    """Mean pairwise loss over the batch's top-scored negatives (and, for
    ``mode="tpauc"``, its bottom-scored positives)."""
    if mode not in ("opauc", "tpauc"):
        raise ValueError(f"unknown MB mode {mode!r}")
    pos_ids = np.asarray(pos_ids, dtype=np.int64)
    neg_ids = np.asarray(neg_ids, dtype=np.int64)
    hn = model.scores_at(state.w, data.features[neg_ids])
    k_neg = _select_count(hyper.mb_top_neg, neg_ids.size)
    if k_neg < 1:
        log.warning("MB: top-%.3g of %d negatives is empty; using the full batch", hyper.mb_top_neg, neg_ids.size)
        k_neg = neg_ids.size
    neg_sel = neg_ids[np.lexsort((np.arange(neg_ids.size), -hn))[:k_neg]]
    pos_sel = pos_ids
    if mode == "tpauc":
        hp = model.scores_at(state.w, data.features[pos_ids])
        k_pos = _select_count(hyper.mb_bottom_pos, pos_ids.size)
        if k_pos < 1:
            log.warning("MB: bottom-%.3g of %d positives is empty; using the full batch",
                        hyper.mb_bottom_pos, pos_ids.size)
            k_pos = pos_ids.size
        pos_sel = pos_ids[np.lexsort((np.arange(pos_ids.size), hp))[:k_pos]]
    _, L, D, Jp, Jn = _batch(model, state, data, pos_sel, neg_sel, loss)
    grad = weighted_pair_grad(D, Jp, Jn) / L.size
    state.extra["grad_estimate"] = grad
    state.extra["selected"] = (pos_sel, neg_sel)
    apply_update(state, grad, hyper.eta1, hyper.gamma1, hyper)
    return state


def auc_pairwise_step(state, hyper, model, data, pos_ids, neg_ids, loss=DEFAULT_LOSS):
    """Full-AUC baseline: mean pairwise surrogate over every batch pair."""
    _, L, D, Jp, Jn = _batch(model, state, data, pos_ids, neg_ids, loss)
    grad = weighted_pair_grad(D, Jp, Jn) / L.size
    state.extra["grad_estimate"] = grad
    apply_update(state, grad, hyper.eta1, hyper.gamma1, hyper)
    return state


def ce_step(state, hyper, model, data, pos_ids, neg_ids, loss=None):
    """Cross-entropy baseline on the union of the two batches.

    The logit is the pre-sigmoid output (the raw score for ``linear_raw``).
    """
    ids = np.concatenate([np.asarray(pos_ids, dtype=np.int64), np.asarray(neg_ids, dtype=np.int64)])
    z, J = model.logits_at(state.w, data.features[ids], with_grad=True)
    y = (data.labels[ids] == 1).astype(np.float64)
    p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    grad = J.T @ (p - y) / ids.size
    state.extra["grad_estimate"] = grad
    apply_update(state, grad, hyper.eta1, hyper.gamma1, hyper)
    return state
