"""Stagewise proximal primal-dual method for the exact (CVaR-CVaR) TPAUC objective.

The min-max problem is

    min_{w, s, pi} max_{u in [0,1]^{n_+}}
        pi + 1/(n_+ alpha) sum_i u_i (s_i + psi_i(w, s_i)/beta - pi)

Each stage adds a proximal term 1/(2 gamma) |(w, s, pi) - anchor|^2 and
runs ``T_k`` stochastic primal-dual steps; the next anchor is the average
of the stage's iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import BatchSampler
from ..losses import pair_terms, weighted_pair_grad
from .state import NumericalFailure, OptimizerState, StepHyper
from .steps import DEFAULT_LOSS


def prox_linear(x, g, x_anchor, eta, gamma):
    """argmin_z z.g + |z - x|^2/(2 eta) + |z - x_anchor|^2/(2 gamma)."""
    if gamma <= 0:
        return x - eta * g
    return (x / eta + x_anchor / gamma - g) / (1.0 / eta + 1.0 / gamma)


def sota_partial_grads(state, hyper, model, data, pos_ids, neg_ids, loss=DEFAULT_LOSS):
    """Stochastic partial gradients in (w, s, pi, u) at the current iterate.

    Returns ``(slots, g_w, g_s, g_pi, g_u)`` where ``g_s`` and ``g_u`` are
    the sampled coordinates only.
    """
    pos_ids = np.asarray(pos_ids, dtype=np.int64)
    neg_ids = np.asarray(neg_ids, dtype=np.int64)
    slots = data.pos_slots(pos_ids)
    L, D, Jp, Jn = pair_terms(model, state.w, data.features[pos_ids], data.features[neg_ids], loss)
    a, b = hyper.alpha_tpr, hyper.beta_fpr
    b_pos, b_neg = L.shape
    s = state.s[slots]
    u = state.u[slots]
    active = (L - s[:, None]) > 0
    g_w = weighted_pair_grad(u[:, None] * active * D, Jp, Jn) / (b_pos * b_neg * a * b)
    g_s = u * (1.0 - active.sum(axis=1) / (b_neg * b)) / (a * b_pos)
    g_pi = 1.0 - u.sum() / (b_pos * a)
    hinge = np.where(active, L - s[:, None], 0.0).sum(axis=1)
    g_u = (s - state.pi + hinge / (b_neg * b)) / (a * b_pos)
    return slots, g_w, g_s, g_pi, g_u


def sota_step(state: OptimizerState, hyper: StepHyper, model, data, pos_ids, neg_ids,
              anchor, loss=DEFAULT_LOSS, prox_gamma=None) -> OptimizerState:
    """One primal-dual step; ``anchor = (w0, s0, pi0)`` is the stage's prox center.

    w, the sampled s-coordinates and pi take closed-form proximal steps;
    the sampled duals take a projected ascent step onto [0, 1].
    """
    w0, s0, pi0 = anchor
    gamma = hyper.prox_gamma if prox_gamma is None else prox_gamma
    slots, g_w, g_s, g_pi, g_u = sota_partial_grads(state, hyper, model, data, pos_ids, neg_ids, loss)
    state.w = prox_linear(state.w, g_w, w0, hyper.eta1, gamma)
    state.s[slots] = prox_linear(state.s[slots], g_s, s0[slots], hyper.eta2, gamma)
    state.pi = float(prox_linear(state.pi, g_pi, pi0, hyper.eta3, gamma))
    state.u[slots] = np.clip(state.u[slots] + hyper.eta4 * g_u, 0.0, 1.0)
    state.visited[slots] = True
    state.last_grad = g_w
    state.extra["grad_estimate"] = g_w
    state.step_count += 1
    return state


def estimate_rho(data, loss, alpha, beta, arch="linear_raw", bound=0.0) -> float:
    """Weak-convexity modulus L_s / (alpha beta) of the min-max objective.

    L_s is exact for linear raw scores: 2 max |x_i - x_j|^2 for the squared
    hinge, max |x_i - x_j|^2 / (4 c^2) for the logistic loss (max over
    positive-negative pairs).  Other architectures need ``bound``.
    """
    if arch != "linear_raw":
        if not bound > 0:
            raise ValueError("smoothness of non-linear models needs a configured rho_bound")
        return bound / (alpha * beta)
    Xp, Xn = data.X_pos, data.X_neg
    sq = (Xp ** 2).sum(1)[:, None] + (Xn ** 2).sum(1)[None, :] - 2.0 * Xp @ Xn.T
    dmax = float(np.max(sq))
    if loss.kind == "squared_hinge":
        ls = 2.0 * dmax
    else:
        ls = dmax / (4.0 * loss.c ** 2)
    return ls / (alpha * beta)


def run_stage(state, hyper, model, data, sampler, loss, gamma, steps):
    """``steps`` primal-dual steps around the current point, then average the iterates."""
    anchor = (state.w.copy(), state.s.copy(), float(state.pi))
    acc_w, acc_s, acc_u, acc_pi = np.zeros_like(state.w), np.zeros_like(state.s), np.zeros_like(state.u), 0.0
    for _ in range(steps):
        pos, neg = sampler.next_batch()
        sota_step(state, hyper, model, data, pos, neg, anchor, loss, prox_gamma=gamma)
        acc_w += state.w
        acc_s += state.s
        acc_u += state.u
        acc_pi += state.pi
    state.w, state.s, state.u, state.pi = acc_w / steps, acc_s / steps, acc_u / steps, acc_pi / steps
    return state


@dataclass
class SotaSchedule:
    """Stage k (1-based) runs ceil(t_scale * n_+^[factor] * k^2) steps at eta / k."""

    stages: int = 5
    t_scale: float = 0.05
    n_plus_factor: bool = True

    def steps(self, k: int, n_pos: int) -> int:
        base = n_pos if self.n_plus_factor else 1
        return max(1, math.ceil(self.t_scale * base * k * k))


def sota_run(state: OptimizerState, hyper: StepHyper, model, data, schedule: SotaSchedule,
             loss=DEFAULT_LOSS, seed=0, sampler=None, callback=None) -> OptimizerState:
    """Run the stagewise method; returns the state holding the last stage averages.

    ``callback(k, state)`` is called after each stage with the averaged iterate.
    """
    if schedule.stages < 1:
        raise ValueError("infeasible schedule: need at least one stage")
    gamma = hyper.prox_gamma
    if gamma <= 0:
        rho = estimate_rho(data, loss, hyper.alpha_tpr, hyper.beta_fpr, model.arch, hyper.rho_bound)
        gamma = 1.0 / rho
    if sampler is None:
        sampler = BatchSampler(data, hyper.batch_pos, hyper.batch_neg, seed)
    for k in range(1, schedule.stages + 1):
        T = schedule.steps(k, data.n_pos)
        if T < 1:
            raise ValueError("infeasible schedule: empty stage")
        run_stage(state, hyper.scaled(1.0 / k), model, data, sampler, loss, gamma, T)
        state.extra["stage"] = k
        if not state.is_finite():
            raise NumericalFailure(f"non-finite SOTA iterate after stage {k}", state.dump())
        if callback is not None:
            callback(k, state)
    return state
