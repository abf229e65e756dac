"""Epoch loop shared by every optimizer, with per-epoch exact pAUC metrics."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .. import losses as L
from ..data import BatchSampler
from ..metrics import model_scoreset, opauc_exact, tpauc_exact
from .sota import SotaSchedule, estimate_rho, run_stage
from .state import NumericalFailure, OptimizerState, StepHyper
from .steps import (DEFAULT_LOSS, auc_pairwise_step, ce_step, mb_baseline_step, sopa_s_step,
                    sopa_step, sota_s_step)

log = logging.getLogger(__name__)

OPTIMIZERS = ("sopa", "sopa_s", "sota_s", "sota", "ce", "auc_sh", "mb_opauc", "mb_tpauc")

OPAUC_POINTS = (0.3, 0.5)
TPAUC_POINTS = ((0.6, 0.4), (0.5, 0.5))

_STEPS = {
    "sopa": sopa_step,
    "sopa_s": sopa_s_step,
    "sota_s": sota_s_step,
    "ce": ce_step,
    "auc_sh": auc_pairwise_step,
    "mb_opauc": lambda *a, **k: mb_baseline_step(*a, **k, mode="opauc"),
    "mb_tpauc": lambda *a, **k: mb_baseline_step(*a, **k, mode="tpauc"),
}


def metric_columns(prefixes=("train", "val")):
    cols = []
    for p in prefixes:
        cols += [f"{p}_opauc_{b}" for b in OPAUC_POINTS]
        cols += [f"{p}_tpauc_{a}_{b}" for a, b in TPAUC_POINTS]
    return cols


def pauc_metrics(model, data, prefix, normalized=True) -> dict:
    """Exact OPAUC/TPAUC at the standard operating points."""
    ss = model_scoreset(model, data)
    out = {}
    for b in OPAUC_POINTS:
        out[f"{prefix}_opauc_{b}"] = opauc_exact(ss, 0.0, b, normalized)
    for a, b in TPAUC_POINTS:
        out[f"{prefix}_tpauc_{a}_{b}"] = tpauc_exact(ss, a, b, normalized)
    return out


def train_objective(tag, model, data, hyper: StepHyper, loss=DEFAULT_LOSS) -> float:
    """The objective each optimizer targets, evaluated full-batch."""
    if tag in ("sopa", "mb_opauc"):
        return L.opauc_cvar_min(model, data, loss, hyper.beta_fpr)[0]
    if tag == "sopa_s":
        return L.opauc_kl_objective_and_grad(model, data, loss, hyper.lam)[0]
    if tag == "sota_s":
        return L.tpauc_kl_objective_and_grad(model, data, loss, hyper.lam, hyper.lam_prime)[0]
    if tag in ("sota", "mb_tpauc"):
        return L.tpauc_cvar_objective(model, data, loss, hyper.alpha_tpr, hyper.beta_fpr, strict=False)
    if tag == "ce":
        return L.cross_entropy(model, data)
    if tag == "auc_sh":
        return L.mean_pairwise_loss(model, data, loss)
    raise ValueError(f"unknown optimizer {tag!r}")


@dataclass
class MetricReport:
    """Per-epoch rows plus timing; ``rows[0]`` is the initial evaluation."""

    optimizer: str
    rows: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)

    @property
    def final(self) -> dict:
        return self.rows[-1]

    def column(self, name):
        return [r[name] for r in self.rows]


def run_training(optimizer_tag, data, model, hyper: StepHyper, epochs: int, seed=0, logger=None,
                 val=None, loss=DEFAULT_LOSS, sota_schedule=None):
    """Train ``model`` on ``data`` and return ``(state, MetricReport)``.

    Deterministic for a given seed.  The step sizes decay by
    ``hyper.decay_factor`` every ``hyper.decay_every`` epochs.  For
    ``"sota"`` each epoch is one proximal stage.  Raises
    :class:`NumericalFailure` on a non-finite iterate or objective.
    """
    if optimizer_tag not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer_tag!r}")
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    logger = logger or log
    state = OptimizerState.init(model.params, data.n_pos, duals=optimizer_tag == "sota")
    sampler = BatchSampler(data, hyper.batch_pos, hyper.batch_neg, seed)
    report = MetricReport(optimizer_tag)
    t0 = time.perf_counter()

    def evaluate(epoch, m):
        obj = train_objective(optimizer_tag, m, data, hyper, loss)
        if not math.isfinite(obj):
            raise NumericalFailure(f"non-finite objective at epoch {epoch}", state.dump())
        row = {"epoch": epoch, "objective": obj}
        row.update(pauc_metrics(m, data, "train"))
        if val is not None:
            row.update(pauc_metrics(m, val, "val"))
        row["grad_norm"] = float(np.linalg.norm(state.last_grad))
        report.rows.append(row)
        report.wall_times.append(time.perf_counter() - t0)
        logger.info("%s epoch %d objective %.6g train_opauc_0.3 %.4f", optimizer_tag, epoch, obj,
                    row["train_opauc_0.3"])

    evaluate(0, model)
    if optimizer_tag == "sota":
        schedule = sota_schedule or SotaSchedule(epochs, hyper.sota_t_scale, hyper.sota_n_plus_factor)
        gamma = hyper.prox_gamma or 1.0 / estimate_rho(data, loss, hyper.alpha_tpr, hyper.beta_fpr,
                                                        model.arch, hyper.rho_bound)
    step = _STEPS.get(optimizer_tag)
    for epoch in range(1, epochs + 1):
        decay = hyper.decay_factor ** ((epoch - 1) // hyper.decay_every) if hyper.decay_every > 0 else 1.0
        hyp = hyper.scaled(decay) if decay != 1.0 else hyper
        if optimizer_tag == "sota":
            run_stage(state, hyp.scaled(1.0 / epoch), model, data, sampler, loss, gamma,
                        schedule.steps(epoch, data.n_pos))
        else:
            for pos, neg in sampler.epoch():
                step(state, hyp, model, data, pos, neg, loss)
                if not np.all(np.isfinite(state.w)):
                    raise NumericalFailure(f"non-finite parameters at epoch {epoch}", state.dump())
        if not state.is_finite():
            raise NumericalFailure(f"non-finite state at epoch {epoch}", state.dump())
        evaluate(epoch, model.with_params(state.w))
    return state, report

