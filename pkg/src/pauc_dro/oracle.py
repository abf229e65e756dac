"""Brute-force references used to check the fast paths.

Nothing here imports from ``metrics`` or ``losses``: arithmetic is
duplicated on purpose so a shared bug cannot hide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np


def pauc_bruteforce(pos_scores, neg_scores, mode="opauc", a=0.0, b=1.0, normalized=True) -> float:
    """Partial AUC by explicit sorting and pair enumeration.

    ``mode="opauc"`` uses the FPR window (a, b) = (alpha0, alpha1);
    ``mode="tpauc"`` uses (a, b) = (alpha, beta).
    """
    pos = [float(v) for v in pos_scores]
    neg = [float(v) for v in neg_scores]
    n_pos, n_neg = len(pos), len(neg)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("degenerate class")
    neg_ranked = sorted(range(n_neg), key=lambda j: (-neg[j], j))
    if mode == "opauc":
        lo = math.ceil(round(n_neg * a, 9))
        hi = math.floor(round(n_neg * b, 9))
        if lo >= hi:
            raise ValueError("empty FPR window")
        chosen_pos = list(range(n_pos))
        chosen_neg = neg_ranked[lo:hi]
        pairs_in_window = n_pos * (hi - lo)
    elif mode == "tpauc":
        k1 = math.floor(round(n_pos * a, 9))
        k2 = math.floor(round(n_neg * b, 9))
        if k1 < 1 or k2 < 1:
            raise ValueError("empty selection window")
        chosen_pos = sorted(range(n_pos), key=lambda i: (pos[i], i))[:k1]
        chosen_neg = neg_ranked[:k2]
        pairs_in_window = k1 * k2
    else:
        raise ValueError(f"unknown mode {mode!r}")
    count = 0
    for i in chosen_pos:
        for j in chosen_neg:
            if pos[i] > neg[j]:
                count += 1
    return count / (pairs_in_window if normalized else n_pos * n_neg)


def auc_bruteforce(pos_scores, neg_scores) -> float:
    total = 0.0
    for p in pos_scores:
        for q in neg_scores:
            total += 1.0 if p > q else (0.5 if p == q else 0.0)
    return total / (len(pos_scores) * len(neg_scores))


def cvar_scan_min(losses, gamma):
    """Minimize ``s + sum(l_i - s)_+ / (n gamma)`` over s in the loss values.

    Returns ``(min_value, argmin_s)``.  The minimizers form an interval whose
    right end is the ``n gamma``-th largest loss; among tied candidates that
    right end is reported.
    """
    losses = [float(v) for v in np.ravel(losses)]
    n = len(losses)
    k = n * gamma
    if abs(k - round(k)) > 1e-9 or round(k) < 1:
        raise ValueError("n * gamma must be a positive integer")
    vals = []
    for s in sorted(set(losses)):
        vals.append((s + math.fsum(max(v - s, 0.0) for v in losses) / (n * gamma), s))
    best = min(v for v, _ in vals)
    tol = 1e-12 * max(1.0, abs(best))
    arg = max(s for v, s in vals if v <= best + tol)
    return best, arg


def cvar_sorted(losses, gamma) -> float:
    """Top-``n gamma`` mean by plain sorting."""
    vals = sorted((float(v) for v in np.ravel(losses)), reverse=True)
    k = int(round(len(vals) * gamma))
    return math.fsum(vals[:k]) / k


@dataclass(frozen=True)
class FdConfig:
    step: float = 1e-5
    norm: str = "max_rel"
    kink_guard: float = 1e-7

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("finite-difference step must be positive")
        if self.norm not in ("max_rel", "l2_rel"):
            raise ValueError(f"unknown norm {self.norm!r}")


class FdResult(NamedTuple):
    grad: np.ndarray
    skipped: list


def finite_diff_grad(objective_fn: Callable, point, cfg: FdConfig = FdConfig(), kink_fn=None) -> FdResult:
    """Central differences, one coordinate at a time.

    ``kink_fn(z)``, if given, returns the arguments of every hinge in the
    objective; a coordinate is skipped (left as NaN) when a perturbation
    flips the sign of one of them or brings it within ``cfg.kink_guard``.
    """
    z = np.array(point, dtype=np.float64)
    grad = np.zeros_like(z)
    skipped = []
    base = np.asarray(kink_fn(z)) if kink_fn is not None else None
    for k in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[k] += cfg.step
        zm[k] -= cfg.step
        if kink_fn is not None:
            ap, am = np.asarray(kink_fn(zp)), np.asarray(kink_fn(zm))
            near = np.minimum(np.abs(ap), np.abs(am)) < cfg.kink_guard
            if np.any((np.sign(ap) != np.sign(base)) | (np.sign(am) != np.sign(base)) | near):
                skipped.append(k)
                grad[k] = np.nan
                continue
        fp, fm = float(objective_fn(zp)), float(objective_fn(zm))
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise FloatingPointError(f"non-finite objective near coordinate {k}")
        grad[k] = (fp - fm) / (2.0 * cfg.step)
    return FdResult(grad, skipped)


def grad_rel_error(analytic, numeric, norm="max_rel", floor=1e-8) -> float:
    """Relative gradient error ignoring NaN (skipped) coordinates."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    keep = ~np.isnan(b)
    a, b = a[keep], b[keep]
    if a.size == 0:
        return 0.0
    if norm == "l2_rel":
        return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), floor))
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), floor))


def weak_convexity_probe(objective_fn: Callable, rho_hat, trials=100, radius=1.0, seed=0, center=None, dim=None) -> float:
    """Worst midpoint-convexity violation of G(z) = F(z) + rho_hat/2 |z|^2.

    Pairs are drawn uniformly in a box of half-width ``radius`` around
    ``center``.  A non-positive return value means no violation was found.
    """
    if not rho_hat >= 0:
        raise ValueError("rho_hat must be non-negative")
    if center is None:
        if dim is None:
            raise ValueError("need a center or a dimension")
        center = np.zeros(dim)
    center = np.asarray(center, dtype=np.float64)
    rng = np.random.default_rng(seed)

    def G(z):
        return float(objective_fn(z)) + 0.5 * rho_hat * float(z @ z)

    worst = -math.inf
    for _ in range(trials):
        z1 = center + rng.uniform(-radius, radius, size=center.size)
        z2 = center + rng.uniform(-radius, radius, size=center.size)
        mid = 0.5 * (z1 + z2)
        viol = G(mid) - 0.5 * (G(z1) + G(z2))
        worst = max(worst, viol)
    return worst


def opauc_cvar_bruteforce(L, beta, s) -> float:
    """F(w, s) from a precomputed loss matrix, by explicit loops."""
    n_pos, n_neg = len(L), len(L[0])
    total = []
    for i in range(n_pos):
        hinge = math.fsum(max(float(L[i][j]) - s[i], 0.0) for j in range(n_neg))
        total.append(s[i] + hinge / (beta * n_neg))
    return math.fsum(total) / n_pos
