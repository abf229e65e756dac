"""Optimizer state, step hyperparameters and the shared parameter update."""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field

import numpy as np

UPDATE_STYLES = ("momentum", "adam")
FLOOR = 1e-12


class NumericalFailure(FloatingPointError):
    """Raised when an iterate or objective stops being finite.

    ``dump`` carries a snapshot of the optimizer state for diagnosis.
    """

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


@dataclass
class StepHyper:
    """Step sizes, mixing rates and levels shared by all optimizers.

    ``gamma0``/``gamma1``/``gamma2`` are moving-average rates on the *new*
    value.  The momentum mix for the parameter update is ``gamma1`` for
    SOPA, SOPA-s and the baselines and ``gamma2`` for SOTA-s; with
    ``update_style="momentum"`` and a mix of 1 the update is plain SGD.
    """

    eta1: float = 1e-2
    eta2: float = 1e-2
    eta3: float = 1e-2
    eta4: float = 1e-2
    gamma0: float = 0.9
    gamma1: float = 0.1
    gamma2: float = 0.1
    beta_fpr: float = 0.3
    alpha_tpr: float = 0.5
    lam: float = 1.0
    lam_prime: float = 1.0
    prox_gamma: float = 0.0  # 0 means: derive from the weak-convexity estimate
    batch_pos: int = 32
    batch_neg: int = 32
    update_style: str = "adam"
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    adam_normalize: bool = True
    weight_decay: float = 0.0
    mb_top_neg: float = 0.3
    mb_bottom_pos: float = 0.5
    decay_every: int = 20
    decay_factor: float = 0.1
    sota_t_scale: float = 0.05
    sota_n_plus_factor: bool = True
    rho_bound: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("eta1", "eta2", "eta3", "eta4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("gamma0", "gamma1", "gamma2"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("beta_fpr", "alpha_tpr", "mb_top_neg", "mb_bottom_pos"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not (self.lam > 0 and self.lam_prime > 0):
            raise ValueError("lam and lam_prime must be positive")
        if self.batch_pos < 1 or self.batch_neg < 1:
            raise ValueError("batch sizes must be positive")
        if self.update_style not in UPDATE_STYLES:
            raise ValueError(f"update_style must be one of {UPDATE_STYLES}")
        if self.prox_gamma < 0:
            raise ValueError("prox_gamma must be non-negative")

    def replace(self, **kw) -> "StepHyper":
        return dataclasses.replace(self, **kw)

    def scaled(self, factor: float) -> "StepHyper":
        return self.replace(eta1=self.eta1 * factor, eta2=self.eta2 * factor,
                            eta3=self.eta3 * factor, eta4=self.eta4 * factor)


@dataclass
class OptimizerState:
    """Mutable per-run state; vectors over positives are indexed by slot."""

    w: np.ndarray
    s: np.ndarray
    u: np.ndarray
    v: float = 0.0
    pi: float = 0.0
    mom: np.ndarray = None
    mom2: np.ndarray = None
    step_count: int = 0
    visited: np.ndarray = None
    last_grad: np.ndarray = None
    floor_hits: int = 0
    extra: dict = field(default_factory=dict)

    @classmethod
    def init(cls, w0, n_pos: int, duals: bool = False) -> "OptimizerState":
        w0 = np.array(w0, dtype=np.float64)
        return cls(
            w=w0,
            s=np.zeros(n_pos),
            u=np.ones(n_pos) if duals else np.zeros(n_pos),
            mom=np.zeros_like(w0),
            mom2=np.zeros_like(w0),
            visited=np.zeros(n_pos, dtype=bool),
            last_grad=np.zeros_like(w0),
        )

    def copy(self) -> "OptimizerState":
        return copy.deepcopy(self)

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.s)) and np.all(np.isfinite(self.u))
            and np.isfinite(self.v) and np.isfinite(self.pi) and np.all(np.isfinite(self.mom))
        )

    def dump(self) -> dict:
        return {
            "step_count": self.step_count,
            "w": self.w.tolist(),
            "s_range": [float(np.min(self.s)), float(np.max(self.s))] if self.s.size else [],
            "u_range": [float(np.min(self.u)), float(np.max(self.u))] if self.u.size else [],
            "v": self.v,
            "pi": self.pi,
            "floor_hits": self.floor_hits,
        }


def apply_update(state: OptimizerState, grad, eta: float, mix: float, hyper: StepHyper):
    """Momentum or Adam-style parameter step driven by the estimator ``grad``.

    Both styles keep ``mom = (1 - mix) mom + mix grad``.  Adam additionally
    tracks a second moment and applies bias correction; with
    ``adam_normalize=False`` it reduces to the momentum step.
    """
    g = np.asarray(grad, dtype=np.float64)
    if hyper.weight_decay:
        g = g + hyper.weight_decay * state.w
    state.last_grad = g
    state.mom = (1.0 - mix) * state.mom + mix * g
    if hyper.update_style == "adam" and hyper.adam_normalize:
        t = state.step_count + 1
        b2 = hyper.adam_beta2
        state.mom2 = b2 * state.mom2 + (1.0 - b2) * g * g
        m_hat = state.mom / (1.0 - (1.0 - mix) ** t) if 0 < mix < 1 else state.mom
        v_hat = state.mom2 / (1.0 - b2 ** t)
        state.w = state.w - eta * m_hat / (np.sqrt(v_hat) + hyper.adam_eps)
    else:
        state.w = state.w - eta * state.mom
    state.step_count += 1
