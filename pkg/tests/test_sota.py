import numpy as np
import pytest

from pauc_dro import losses as L
from pauc_dro.data import SynthSpec, generate
from pauc_dro.model import ScoreModel
from pauc_dro.oracle import weak_convexity_probe
from pauc_dro.optim import (OptimizerState, SotaSchedule, StepHyper, estimate_rho, prox_linear,
                            sota_partial_grads, sota_run, sota_step)

SQH = L.PairwiseLossSpec()


@pytest.fixture
def overlap():
    return generate(SynthSpec(n=400, pos_frac=0.1, d=5, preset="overlap", seed=0))


def test_prox_closed_form():
    rng = np.random.default_rng(0)
    x, g, x0 = rng.normal(size=(3, 4))
    eta, gamma = 0.3, 2.0
    z = prox_linear(x, g, x0, eta, gamma)
    # first-order condition of z.g + |z - x|^2/(2 eta) + |z - x0|^2/(2 gamma)
    np.testing.assert_allclose(g + (z - x) / eta + (z - x0) / gamma, 0.0, atol=1e-14)
    np.testing.assert_allclose(z, (x / eta + x0 / gamma - g) / (1 / eta + 1 / gamma))
    np.testing.assert_allclose(prox_linear(x, g, x0, eta, 0.0), x - eta * g)


def test_uniform_duals_reduce_to_cvar_gradient(overlap):
    model = ScoreModel.init("linear_raw", overlap.d, seed=1)
    st = OptimizerState.init(model.params, overlap.n_pos, duals=True)
    st.s[:] = np.random.default_rng(1).uniform(0.5, 2.0, overlap.n_pos)
    h = StepHyper(alpha_tpr=1.0, beta_fpr=1.0)
    _, g_w, _, _, _ = sota_partial_grads(st, h, model, overlap, overlap.pos_ids, overlap.neg_ids, SQH)
    _, expect, _ = L.opauc_cvar_objective_and_grad(model, overlap, SQH, 1.0, st.s)
    np.testing.assert_allclose(g_w, expect, rtol=1e-12)


def test_pi_stationary_when_duals_equal_alpha(overlap):
    model = ScoreModel.init("linear_raw", overlap.d, seed=1)
    st = OptimizerState.init(model.params, overlap.n_pos, duals=True)
    st.u[:] = 0.5
    h = StepHyper(alpha_tpr=0.5, beta_fpr=0.5)
    _, _, _, g_pi, _ = sota_partial_grads(st, h, model, overlap, overlap.pos_ids, overlap.neg_ids, SQH)
    assert g_pi == pytest.approx(0.0, abs=1e-15)


def test_partial_grads_match_minmax_objective(overlap):
    model = ScoreModel.init("linear_raw", overlap.d, seed=2)
    rng = np.random.default_rng(2)
    st = OptimizerState.init(model.params, overlap.n_pos, duals=True)
    st.s[:] = rng.uniform(0.5, 3.0, overlap.n_pos)
    st.u[:] = rng.uniform(0, 1, overlap.n_pos)
    st.pi = 0.7
    a, b = 0.5, 0.5
    h = StepHyper(alpha_tpr=a, beta_fpr=b)
    _, g_w, g_s, g_pi, g_u = sota_partial_grads(st, h, model, overlap, overlap.pos_ids, overlap.neg_ids, SQH)

    def F(w=st.w, s=st.s, pi=st.pi, u=st.u):
        return L.tpauc_minmax_objective(model.with_params(w), overlap, SQH, a, b, s, pi, u)

    e = 1e-6
    assert (F(pi=st.pi + e) - F(pi=st.pi - e)) / (2 * e) == pytest.approx(g_pi, abs=1e-7)
    for i in (0, 7):
        du = np.zeros_like(st.u)
        du[i] = e
        assert (F(u=st.u + du) - F(u=st.u - du)) / (2 * e) == pytest.approx(g_u[i], abs=1e-7)
        assert (F(s=st.s + du) - F(s=st.s - du)) / (2 * e) == pytest.approx(g_s[i], abs=1e-6)
    for k in range(model.n_params):
        dw = np.zeros_like(st.w)
        dw[k] = e
        assert (F(w=st.w + dw) - F(w=st.w - dw)) / (2 * e) == pytest.approx(g_w[k], rel=1e-5, abs=1e-7)


def test_duals_projected_every_step(overlap):
    model = ScoreModel.init("linear_raw", overlap.d, seed=3)
    st = OptimizerState.init(model.params, overlap.n_pos, duals=True)
    anchor = (st.w.copy(), st.s.copy(), st.pi)
    h = StepHyper(eta1=0.5, eta2=0.5, eta3=0.5, eta4=50.0, batch_pos=5, batch_neg=20)
    rng = np.random.default_rng(0)
    for _ in range(50):
        pos = rng.choice(overlap.pos_ids, 5, replace=False)
        neg = rng.choice(overlap.neg_ids, 20, replace=False)
        sota_step(st, h, model, overlap, pos, neg, anchor, SQH, prox_gamma=0.1)
        assert np.all((st.u >= 0) & (st.u <= 1))


def test_sota_run_decreases_objective(overlap):
    model = ScoreModel.init("linear_raw", overlap.d, seed=0)
    f0 = L.tpauc_cvar_objective(model, overlap, SQH, 0.5, 0.5)
    h = StepHyper(eta1=0.5, eta2=0.5, eta3=0.5, eta4=0.5, batch_pos=8, batch_neg=32)
    st = OptimizerState.init(model.params, overlap.n_pos, duals=True)
    seen = []
    sota_run(st, h, model, overlap, SotaSchedule(5, 1.0), SQH, seed=0,
             callback=lambda k, s: seen.append((k, L.tpauc_cvar_objective(model.with_params(s.w), overlap, SQH,
                                                                           0.5, 0.5))))
    assert [k for k, _ in seen] == [1, 2, 3, 4, 5]
    assert seen[-1][1] < f0
    assert np.all((st.u >= 0) & (st.u <= 1))


def test_schedule_and_errors(overlap):
    sch = SotaSchedule(3, 0.05)
    assert [sch.steps(k, 40) for k in (1, 2, 3)] == [2, 8, 18]
    assert SotaSchedule(3, 0.5, n_plus_factor=False).steps(2, 40) == 2
    model = ScoreModel.init("linear_raw", overlap.d)
    st = OptimizerState.init(model.params, overlap.n_pos, duals=True)
    with pytest.raises(ValueError, match="infeasible"):
        sota_run(st, StepHyper(), model, overlap, SotaSchedule(0))


def test_rho_estimate(overlap):
    Xp, Xn = overlap.X_pos, overlap.X_neg
    dmax = max(float(np.sum((p - q) ** 2)) for p in Xp for q in Xn)
    assert estimate_rho(overlap, SQH, 0.5, 0.4) == pytest.approx(2 * dmax / 0.2)
    with pytest.raises(ValueError):
        estimate_rho(overlap, SQH, 0.5, 0.5, arch="mlp_sigmoid")
    assert estimate_rho(overlap, SQH, 0.5, 0.5, arch="mlp_sigmoid", bound=3.0) == 12.0


def test_weak_convexity_of_cvar_objective(overlap):
    small = generate(SynthSpec(n=60, pos_frac=0.2, d=3, preset="overlap", seed=1))
    beta = 0.3
    rho = estimate_rho(small, SQH, 1.0, beta)

    def F(z):
        return L.opauc_cvar_objective(ScoreModel("linear_raw", 3, z[:3]), small, SQH, beta, z[3:])

    assert weak_convexity_probe(F, rho, trials=100, radius=2.0, seed=0, dim=3 + small.n_pos) <= 1e-8
