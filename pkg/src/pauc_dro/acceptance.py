"""Self-checks: closed-form equivalences, gradients and desk-scale training runs.

Each check returns a :class:`CheckResult`.  ``run_checks`` runs a selection
and ``format_result`` renders the one-line verdict printed by the CLI and
by the acceptance tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import losses as L
from . import oracle
from .data import LabeledDataset, SynthSpec, generate
from .metrics import ScoreSet, opauc_exact, roc_auc, tpauc_exact
from .model import ScoreModel
from .optim import OptimizerState, SotaSchedule, StepHyper, estimate_rho, run_training, sota_run
from .optim.steps import sopa_s_step, sota_s_step

SQH = L.PairwiseLossSpec("squared_hinge", 1.0)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def format_result(r: CheckResult) -> str:
    verdict = "PASS" if r.passed else "FAIL"
    return f"[{verdict}] {r.number}. {r.name}: {r.detail} ({r.seconds:.2f}s)"


def _random_instance(rng, max_pos, max_neg, d):
    n_pos = int(rng.integers(2, max_pos + 1))
    n_neg = int(rng.integers(2, max_neg + 1))
    X_pos = rng.normal(0.5, 1.0, (n_pos, d))
    X_neg = rng.normal(-0.5, 1.0, (n_neg, d))
    return LabeledDataset.from_classes(X_pos, X_neg)


def check_cvar_equivalence(seed=0, instances=50):
    """min_s F(w, s), by scanning candidate thresholds, equals the top-k surrogate."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        data = _random_instance(rng, 10, 20, 3)
        n_neg = data.n_neg
        k = int(rng.integers(1, n_neg + 1))
        beta = k / n_neg
        model = ScoreModel("linear_raw", 3, rng.normal(size=3))
        Lmat = L.pair_terms(model, model.params, data.X_pos, data.X_neg, SQH, with_grad=False)
        per_pos = [oracle.cvar_scan_min(row, beta)[0] for row in Lmat]
        scanned = math.fsum(per_pos) / len(per_pos)
        topk = L.opauc_topk_surrogate(model, data, SQH, beta)
        worst = max(worst, abs(scanned - topk))
    return worst <= 1e-9, f"max |min_s F - top-k| = {worst:.2e} over {instances} instances"


def check_kl_limits(seed=0):
    rng = np.random.default_rng(seed)
    losses = rng.exponential(1.0, 40)
    n = losses.size
    big = abs(L.dro_kl(losses, 1e6) - float(np.mean(losses)))
    grid = np.logspace(-3, 3, 20)
    vals = [L.dro_kl(losses, lam) for lam in grid]
    top = float(np.max(losses))
    bounds = all(top - lam * math.log(n) - 1e-12 <= v <= top + 1e-12 for lam, v in zip(grid, vals))
    rises = max(0.0, max(b - a for a, b in zip(vals, vals[1:])))
    ok = big <= 1e-4 and bounds and rises <= 1e-12
    return ok, f"|KL(1e6) - mean| = {big:.1e}, bounds hold: {bounds}, worst increase {rises:.1e}"


def _fd_error(fn_grad, model):
    w = model.params
    _, g = fn_grad(model)
    num = oracle.finite_diff_grad(lambda z: fn_grad(model.with_params(z))[0], w).grad
    return oracle.grad_rel_error(g, num)


def check_kl_gradients(seed=0, points=20, opauc_grad=None):
    """Analytic KL gradients against central differences (step 1e-5).

    ``opauc_grad`` swaps in another OPAUC-KL implementation, used to check
    that a corrupted gradient is caught.
    """
    opauc_grad = opauc_grad or L.opauc_kl_objective_and_grad
    rng = np.random.default_rng(seed)
    data = generate(SynthSpec(n=60, pos_frac=0.25, d=4, preset="overlap", seed=seed))
    worst = 0.0
    for t in range(points):
        arch = ("linear_sigmoid", "mlp_sigmoid", "linear_raw")[t % 3]
        model = ScoreModel.init(arch, data.d, hidden=5 if arch.startswith("mlp") else 0, seed=int(rng.integers(1 << 30)))
        model = model.with_params(model.params + rng.normal(0, 0.5, model.n_params))
        lam = float(rng.choice([0.1, 0.5, 1.0, 3.0]))
        lamp = float(rng.choice([0.1, 1.0, 2.0]))
        spec = L.PairwiseLossSpec(("squared_hinge", "logistic")[t % 2], 1.0)
        e1 = _fd_error(lambda m: opauc_grad(m, data, spec, lam), model)
        e2 = _fd_error(lambda m: L.tpauc_kl_objective_and_grad(m, data, spec, lam, lamp), model)
        worst = max(worst, e1, e2)
    return worst < 1e-5, f"max relative error {worst:.2e} at {points} points"


def check_tracker_consistency(seed=0):
    """With all mixing rates 1, full batches and frozen w, the second-pass
    estimator of SOPA-s and SOTA-s is the exact full-batch gradient."""
    data = generate(SynthSpec(n=80, pos_frac=0.25, d=4, preset="overlap", seed=seed))
    model = ScoreModel.init("mlp_sigmoid", data.d, hidden=4, seed=seed)
    hyper = StepHyper(eta1=0.0, gamma0=1.0, gamma1=1.0, gamma2=1.0, lam=0.7, lam_prime=0.4,
                      update_style="momentum")
    errs = []
    for step, exact in (
        (sopa_s_step, lambda: L.opauc_kl_objective_and_grad(model, data, SQH, hyper.lam)[1]),
        (sota_s_step, lambda: L.tpauc_kl_objective_and_grad(model, data, SQH, hyper.lam, hyper.lam_prime)[1]),
    ):
        state = OptimizerState.init(model.params, data.n_pos)
        for _ in range(2):
            step(state, hyper, model, data, data.pos_ids, data.neg_ids, SQH)
        g = exact()
        errs.append(float(np.max(np.abs(state.extra["grad_estimate"] - g)) / max(np.max(np.abs(g)), 1e-12)))
    return max(errs) <= 1e-8, f"SOPA-s error {errs[0]:.1e}, SOTA-s error {errs[1]:.1e}"


def check_weak_convexity(seed=0, trials=100):
    """Midpoint probe of F(w, s) + rho/2 |(w, s)|^2 with rho = L_s / beta."""
    data = generate(SynthSpec(n=60, pos_frac=0.2, d=3, preset="overlap", seed=seed))
    beta = 0.3
    rho = estimate_rho(data, SQH, 1.0, beta, "linear_raw")
    d = data.d

    def F(z):
        m = ScoreModel("linear_raw", d, z[:d])
        return L.opauc_cvar_objective(m, data, SQH, beta, z[d:])

    worst = oracle.weak_convexity_probe(F, rho, trials=trials, radius=2.0, seed=seed, dim=d + data.n_pos)
    return worst <= 1e-8, f"worst midpoint violation {worst:.2e} (rho = {rho:.3g})"


RE_LAMBDAS = (0.05, 0.1, 0.3, 1.0, 3.0, 10.0)


def re_curve(data, betas=(0.3, 0.5), lambdas=RE_LAMBDAS, draws=100, seed=0, arch="mlp_sigmoid", hidden=16,
             loss=SQH):
    """Relative error of the KL objective against the exact CVaR objective.

    Returns ``(rows, skipped)`` with one row per (beta, lambda) holding the
    mean and standard deviation over parameter draws.  Draws whose CVaR
    objective is zero are skipped and counted.
    """
    if len(lambdas) == 0:
        raise ValueError("empty lambda grid")
    if len(betas) == 0:
        raise ValueError("empty beta list")
    rng = np.random.default_rng(seed)
    errs = {(b, lam): [] for b in betas for lam in lambdas}
    skipped = 0
    for t in range(draws):
        model = ScoreModel.init(arch, data.d, hidden=hidden, seed=int(rng.integers(1 << 31)))
        for b in betas:
            cv = L.opauc_cvar_min(model, data, loss, b)[0]
            if cv == 0:
                skipped += 1
                continue
            for lam in lambdas:
                kl = L.opauc_kl_objective_and_grad(model, data, loss, lam)[0]
                errs[(b, lam)].append(abs(kl - cv) / abs(cv))
    rows = []
    for (b, lam), vals in errs.items():
        arr = np.asarray(vals)
        rows.append({"beta": b, "lambda": lam, "draws": arr.size,
                     "mean_re": float(arr.mean()) if arr.size else float("nan"),
                     "std_re": float(arr.std()) if arr.size else float("nan")})
    return rows, skipped


def check_re_curve(seed=0):
    data = generate(SynthSpec(n=1000, pos_frac=0.1, d=10, preset="overlap", seed=seed))
    rows, _ = re_curve(data, seed=seed)
    best = {}
    for r in rows:
        best[r["beta"]] = min(best.get(r["beta"], math.inf), r["mean_re"])
    ok = all(v < 0.05 for v in best.values())
    return ok, ", ".join(f"beta={b}: min mean RE {v:.4f}" for b, v in best.items())


# Desk-scale training preset shared with the demos and the CLI defaults.
TRAIN_PRESET = dict(epochs=40, eta1=0.05, eta2=20.0, beta_fpr=0.3, alpha_tpr=0.5, lam=1.0, lam_prime=1.0,
                    gamma0=0.9, gamma1=0.9, gamma2=0.1, batch_pos=32, batch_neg=32, decay_every=0)


def training_ordering(seeds=range(5), preset=TRAIN_PRESET):
    """Per-seed final train OPAUC(0.3) and TPAUC(0.5, 0.5) for CE, SOPA and SOTA-s."""
    cfg = dict(preset)
    epochs = cfg.pop("epochs")
    hyper = StepHyper(**cfg)
    out = []
    for seed in seeds:
        data = generate(SynthSpec(n=2000, pos_frac=0.1, d=10, preset="hard_negatives", seed=seed))
        model = ScoreModel.init("linear_sigmoid", data.d, seed=seed)
        res = {}
        for tag in ("ce", "sopa", "sota_s"):
            _, rep = run_training(tag, data, model, hyper, epochs, seed=seed)
            res[tag] = (rep.final["train_opauc_0.3"], rep.final["train_tpauc_0.5_0.5"])
        out.append(res)
    return out


def check_training_ordering():
    res = training_ordering()
    wins_op = sum(r["sopa"][0] - r["ce"][0] >= 0.01 for r in res)
    wins_tp = sum(r["sota_s"][1] - r["ce"][1] >= 0.01 for r in res)
    gap_op = min(r["sopa"][0] - r["ce"][0] for r in res)
    gap_tp = min(r["sota_s"][1] - r["ce"][1] for r in res)
    ok = wins_op >= 4 and wins_tp >= 4
    return ok, (f"SOPA beats CE on OPAUC(0.3) on {wins_op}/5 seeds (min gap {gap_op:+.3f}); "
                f"SOTA-s beats CE on TPAUC(0.5,0.5) on {wins_tp}/5 (min gap {gap_tp:+.3f})")


def check_metric_oracle(seed=0, instances=200):
    rng = np.random.default_rng(seed)
    mismatches = 0
    for t in range(instances):
        n_pos = int(rng.integers(1, 31))
        n_neg = int(rng.integers(1, 31))
        # coarse grid values produce ties on purpose
        pos = rng.integers(0, 12, n_pos) / 4.0 if t % 2 else rng.normal(size=n_pos)
        neg = rng.integers(0, 12, n_neg) / 4.0 if t % 2 else rng.normal(size=n_neg)
        ss = ScoreSet(pos.tolist(), neg.tolist())
        a1 = float(rng.uniform(0.05, 1.0))
        a0 = float(rng.uniform(0.0, a1))
        k1, k2 = math.ceil(n_neg * a0), math.floor(n_neg * a1)
        if k1 < k2:
            for norm in (True, False):
                if opauc_exact(ss, a0, a1, norm) != oracle.pauc_bruteforce(pos, neg, "opauc", a0, a1, norm):
                    mismatches += 1
        a, b = float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 1.0))
        if math.floor(n_pos * a) >= 1 and math.floor(n_neg * b) >= 1:
            for norm in (True, False):
                if tpauc_exact(ss, a, b, norm) != oracle.pauc_bruteforce(pos, neg, "tpauc", a, b, norm):
                    mismatches += 1
        if t % 2 == 0 and opauc_exact(ss, 0.0, 1.0, False) != roc_auc(ss):
            mismatches += 1
    return mismatches == 0, f"{mismatches} mismatches over {instances} instances"


def check_sota_sanity(seed=0, stages=5):
    """Stagewise method on integral K1, K2: objective drops, duals stay in [0, 1]."""
    data = generate(SynthSpec(n=400, pos_frac=0.1, d=5, preset="overlap", seed=seed))
    alpha, beta = 0.5, 0.5
    model = ScoreModel.init("linear_raw", data.d, seed=seed)
    f0 = L.tpauc_cvar_objective(model, data, SQH, alpha, beta)
    hyper = StepHyper(eta1=0.5, eta2=0.5, eta3=0.5, eta4=0.5, alpha_tpr=alpha, beta_fpr=beta,
                      batch_pos=8, batch_neg=32)
    state = OptimizerState.init(model.params, data.n_pos, duals=True)
    in_box = [True]

    def watch(k, st):
        in_box[0] &= bool(np.all((st.u >= 0) & (st.u <= 1)))

    sota_run(state, hyper, model, data, SotaSchedule(stages, 1.0), SQH, seed=seed, callback=watch)
    f_end = L.tpauc_cvar_objective(model.with_params(state.w), data, SQH, alpha, beta)
    ok = f_end < f0 and in_box[0]
    return ok, f"objective {f0:.4f} -> {f_end:.4f} after {stages} stages, duals in [0,1]: {in_box[0]}"


CHECKS = {
    1: ("CVaR threshold minimum equals top-k surrogate", check_cvar_equivalence),
    2: ("KL-DRO limits and monotonicity", check_kl_limits),
    3: ("KL objective gradients vs finite differences", check_kl_gradients),
    4: ("tracker estimators reproduce full-batch gradients", check_tracker_consistency),
    5: ("weak convexity midpoint probe", check_weak_convexity),
    6: ("KL estimator relative error curve", check_re_curve),
    7: ("desk-scale training ordering vs CE", check_training_ordering),
    8: ("exact metrics equal brute-force counts", check_metric_oracle),
    9: ("stagewise TPAUC method decreases its objective", check_sota_sanity),
}

SEEDED = {1, 2, 3, 4, 5, 6, 8, 9}


def run_check(number, seed=0) -> CheckResult:
    name, fn = CHECKS[number]
    t0 = time.perf_counter()
    passed, detail = fn(seed=seed) if number in SEEDED else fn()
    return CheckResult(number, name, bool(passed), detail, time.perf_counter() - t0)


def run_checks(numbers=None, seed=0):
    return [run_check(k, seed) for k in (numbers or sorted(CHECKS))]
