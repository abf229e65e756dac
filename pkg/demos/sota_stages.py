# Stagewise proximal method for two-way partial AUC.
#
# Each stage solves a proximal subproblem around the last stage average
# with step eta / k, then restarts from the average.  The objective is the
# min-max form with duals on the positives, so we print it per stage.
import numpy as np

from pauc_dro import ScoreModel, SynthSpec, generate, tpauc_cvar_objective, tpauc_exact
from pauc_dro.losses import PairwiseLossSpec
from pauc_dro.metrics import model_scoreset
from pauc_dro.optim import OptimizerState, SotaSchedule, StepHyper, estimate_rho, sota_run

data = generate(SynthSpec(n=400, pos_frac=0.1, d=5, preset="overlap", seed=1))
loss = PairwiseLossSpec()
hyper = StepHyper(eta1=0.5, eta2=0.5, eta3=0.5, eta4=0.5, alpha_tpr=0.5, beta_fpr=0.5,
                  batch_pos=8, batch_neg=32)
model = ScoreModel("linear_raw", data.d, np.zeros(data.d))

rho = estimate_rho(data, loss, hyper.alpha_tpr, hyper.beta_fpr)
print("weak-convexity estimate rho = %.2f, prox weight 1/rho = %.4f" % (rho, 1 / rho))

schedule = SotaSchedule(stages=6, t_scale=1.0)
print("steps per stage:", [schedule.steps(k, data.n_pos) for k in range(1, 7)])


def report(k, state):
    m = model.with_params(state.w)
    obj = tpauc_cvar_objective(m, data, loss, 0.5, 0.5, strict=False)
    print("stage %d  objective %.4f  TPAUC(0.5,0.5) %.4f  mean threshold %.3f"
          % (k, obj, tpauc_exact(model_scoreset(m, data), 0.5, 0.5), state.s.mean()))


state = OptimizerState.init(model.params, data.n_pos, duals=True)
report(0, state)
sota_run(state, hyper, model, data, schedule, loss, seed=0, callback=report)
