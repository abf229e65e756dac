# Cross-entropy vs the partial-AUC optimizers on the hard_negatives set.
#
# A few negatives sit far out along the first axis, past the positives.
# A model fit for full AUC mostly ignores them; a model fit for the
# low-FPR region has to push them down.
import numpy as np

from pauc_dro import ScoreModel, SynthSpec, generate, opauc_exact, tpauc_exact
from pauc_dro.metrics import model_scoreset
from pauc_dro.optim import StepHyper, run_training
from pauc_dro.acceptance import TRAIN_PRESET

data = generate(SynthSpec(n=2000, pos_frac=0.1, d=10, preset="hard_negatives", seed=0))
print("positives", data.n_pos, "negatives", data.n_neg)

cfg = dict(TRAIN_PRESET)
epochs = cfg.pop("epochs")
hyper = StepHyper(**cfg)

for tag in ("ce", "auc_sh", "sopa", "sopa_s", "sota_s"):
    model = ScoreModel.init("linear_sigmoid", data.d, seed=0)
    state, report = run_training(tag, data, model, hyper, epochs, seed=0)
    ss = model_scoreset(model.with_params(state.w), data)
    print(f"{tag:8s} OPAUC(0.3)={opauc_exact(ss, 0, 0.3):.4f}  TPAUC(0.5,0.5)={tpauc_exact(ss, 0.5, 0.5):.4f}")

# Direction of the learned weights: the pAUC runs tilt away from e1,
# the axis carrying the hard negatives.
model = ScoreModel.init("linear_sigmoid", data.d, seed=0)
w_ce = run_training("ce", data, model, hyper, epochs)[0].w
w_pa = run_training("sopa", data, model, hyper, epochs)[0].w
cos = w_ce @ w_pa / np.linalg.norm(w_ce) / np.linalg.norm(w_pa)
print("angle between CE and SOPA weights: %.1f deg" % np.degrees(np.arccos(np.clip(cos, -1, 1))))
