"""Partial AUC maximization through distributionally robust pairwise losses."""

from .data import BatchSampler, LabeledDataset, SynthSpec, batch_sampler, generate, load_csv, split, write_csv
from .losses import (PairwiseLossSpec, cvar_variational, dro_cvar, dro_kl, opauc_cvar_min,
                     opauc_cvar_objective, opauc_kl_objective_and_grad, opauc_topk_surrogate,
                     pairwise_loss, tpauc_cvar_objective, tpauc_kl_objective_and_grad)
from .metrics import ScoreSet, opauc_exact, roc_auc, tpauc_exact
from .model import ScoreModel, pairloss_grad

__version__ = "0.1.0"
