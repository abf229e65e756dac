"""Stochastic optimizers for DRO-based partial AUC objectives."""

from .moreau import MoreauEstimate, moreau_stationarity_estimate
from .sota import SotaSchedule, estimate_rho, prox_linear, sota_partial_grads, sota_run, sota_step
from .state import NumericalFailure, OptimizerState, StepHyper, apply_update
from .steps import (auc_pairwise_step, ce_step, mb_baseline_step, sopa_s_step, sopa_step,
                    sota_s_step)
from .train import OPTIMIZERS, MetricReport, pauc_metrics, run_training, train_objective

__all__ = [
    "MetricReport", "MoreauEstimate", "NumericalFailure", "OPTIMIZERS", "OptimizerState",
    "SotaSchedule", "StepHyper", "apply_update", "auc_pairwise_step", "ce_step", "estimate_rho",
    "mb_baseline_step", "moreau_stationarity_estimate", "pauc_metrics", "prox_linear",
    "run_training", "sopa_s_step", "sopa_step", "sota_partial_grads", "sota_run", "sota_s_step",
    "sota_step", "train_objective",
]
