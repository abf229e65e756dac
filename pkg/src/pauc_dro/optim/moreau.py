"""Near-stationarity diagnostic based on the Moreau envelope."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np


class MoreauEstimate(NamedTuple):
    value: float
    converged: bool
    prox_point: np.ndarray


def moreau_stationarity_estimate(objective_fn, point, rho_hat, inner_iters=500, lr=None) -> MoreauEstimate:
    """Approximate |grad F_{1/rho_hat}(point)| = rho_hat |point - prox(point)|.

    ``objective_fn(z)`` returns ``(value, grad)``.  The prox subproblem
    min_z F(z) + rho_hat/2 |z - point|^2 is solved by ``inner_iters`` plain
    gradient steps of size ``lr`` (default ``1 / (2 rho_hat)``).  A
    non-finite or blowing-up inner solve returns ``converged=False``.
    """
    x = np.array(point, dtype=np.float64)
    if inner_iters <= 0:
        return MoreauEstimate(0.0, False, x.copy())
    if not rho_hat > 0:
        raise ValueError("rho_hat must be positive")
    lr = 1.0 / (2.0 * rho_hat) if lr is None else lr
    z = x.copy()
    f0, _ = objective_fn(z)
    start = float(f0)
    for _ in range(inner_iters):
        f, g = objective_fn(z)
        g = np.asarray(g, dtype=np.float64) + rho_hat * (z - x)
        z = z - lr * g
        if not np.all(np.isfinite(z)) or not math.isfinite(float(f)):
            return MoreauEstimate(float("nan"), False, z)
    f_end = float(objective_fn(z)[0]) + 0.5 * rho_hat * float((z - x) @ (z - x))
    # the prox objective at z may never exceed its value at the start point
    ok = math.isfinite(f_end) and f_end <= start + 1e-9 * max(1.0, abs(start))
    return MoreauEstimate(float(rho_hat * np.linalg.norm(x - z)), ok, z)
