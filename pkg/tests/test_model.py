import numpy as np
import pytest

from pauc_dro.losses import PairwiseLossSpec, pairwise_loss
from pauc_dro.model import ScoreModel, n_params, pairloss_grad
from pauc_dro.oracle import finite_diff_grad, grad_rel_error

SQH = PairwiseLossSpec()


def test_score_examples():
    x = np.array([0.3, -2.0])
    assert ScoreModel("linear_raw", 2, [0.0, 0.0]).score(x) == 0.0
    assert ScoreModel("linear_sigmoid", 2, [0.0, 0.0]).score(x) == 0.5
    assert ScoreModel("linear_raw", 2, [1.0, 2.0]).score([3.0, -1.0]) == 1.0


def test_score_grad_examples():
    x = np.array([0.7, -1.5, 2.0])
    np.testing.assert_array_equal(ScoreModel("linear_raw", 3, [0.2, 0.1, -4.0]).score_grad(x), x)
    np.testing.assert_allclose(ScoreModel("linear_sigmoid", 3, np.zeros(3)).score_grad(x), 0.25 * x)


def test_dimension_mismatch():
    m = ScoreModel("linear_raw", 2, [1.0, 1.0])
    with pytest.raises(ValueError, match="dimension mismatch"):
        m.score([1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="dimension mismatch"):
        m.score_grad(np.ones((2, 3)))
    with pytest.raises(ValueError):
        ScoreModel("linear_raw", 2, [1.0])
    with pytest.raises(ValueError):
        ScoreModel("mlp_sigmoid", 2, np.zeros(5), hidden=0)
    with pytest.raises(ValueError):
        ScoreModel("cnn", 2, [1.0, 1.0])


@pytest.mark.parametrize("arch,hidden", [("linear_raw", 0), ("linear_sigmoid", 0), ("mlp_sigmoid", 3),
                                         ("mlp_sigmoid", 5)])
@pytest.mark.parametrize("activation", ["softplus", "tanh"])
def test_score_grad_matches_fd(arch, hidden, activation):
    rng = np.random.default_rng(7)
    for t in range(50):
        m = ScoreModel.init(arch, 4, hidden=hidden, activation=activation, seed=t)
        m = m.with_params(m.params + rng.normal(0, 0.5, m.n_params))
        x = rng.normal(size=4)
        fd = finite_diff_grad(lambda w: m.with_params(w).score(x), m.params).grad
        assert grad_rel_error(m.score_grad(x), fd) < 1e-6


def test_mlp_has_thirty_params_case():
    assert n_params("mlp_sigmoid", 4, 5) == 31
    m = ScoreModel.init("mlp_sigmoid", 4, hidden=5, seed=3)
    x = np.array([0.1, -0.4, 1.2, 0.0])
    fd = finite_diff_grad(lambda w: m.with_params(w).score(x), m.params).grad
    assert grad_rel_error(m.score_grad(x), fd) < 1e-6


@pytest.mark.parametrize("arch", ["linear_sigmoid", "mlp_sigmoid"])
def test_sigmoid_scores_bounded(arch):
    rng = np.random.default_rng(0)
    m = ScoreModel.init(arch, 3, hidden=4, seed=0)
    m = m.with_params(rng.normal(0, 5, m.n_params))
    h = m.scores(rng.normal(0, 3, (500, 3)))
    assert np.all((h > 0) & (h < 1))


def test_init_range_and_determinism():
    a = ScoreModel.init("mlp_sigmoid", 9, hidden=4, seed=11)
    b = ScoreModel.init("mlp_sigmoid", 9, hidden=4, seed=11)
    np.testing.assert_array_equal(a.params, b.params)
    assert np.all(np.abs(a.params[:36]) <= 1 / 3)
    assert np.all(np.abs(a.params[40:]) <= 0.5)


def test_pairloss_grad_examples():
    m = ScoreModel.init("mlp_sigmoid", 2, hidden=3, seed=1)
    x = np.array([0.4, -0.2])
    loss, g = pairloss_grad(m, SQH, x, x)
    assert loss == 1.0
    np.testing.assert_array_equal(g, 0.0)
    lin = ScoreModel("linear_raw", 2, [0.0, 0.0])
    loss, g = pairloss_grad(lin, SQH, [1.0, 0.0], [0.0, 1.0])
    assert loss == 1.0
    np.testing.assert_array_equal(g, [-2.0, 2.0])


def test_pairloss_grad_linear_closed_form():
    rng = np.random.default_rng(2)
    for _ in range(20):
        w, xi, xj = rng.normal(size=(3, 5))
        m = ScoreModel("linear_raw", 5, w)
        _, g = pairloss_grad(m, SQH, xi, xj)
        np.testing.assert_allclose(g, pairwise_loss(SQH, w @ (xi - xj))[1] * (xi - xj), rtol=1e-14, atol=1e-14)


def test_pairloss_grad_mlp_matches_fd():
    rng = np.random.default_rng(3)
    for t in range(10):
        m = ScoreModel.init("mlp_sigmoid", 3, hidden=4, seed=t)
        xi, xj = rng.normal(size=(2, 3))
        spec = PairwiseLossSpec("logistic", 0.5)
        _, g = pairloss_grad(m, spec, xi, xj)
        fd = finite_diff_grad(lambda w: pairloss_grad(m.with_params(w), spec, xi, xj)[0], m.params).grad
        assert grad_rel_error(g, fd) < 1e-5


def test_checkpoint_roundtrip(tmp_path):
    m = ScoreModel.init("mlp_sigmoid", 3, hidden=2, activation="tanh", seed=5)
    path = tmp_path / "m.json"
    m.save(path)
    back = ScoreModel.load(path)
    assert (back.arch, back.input_dim, back.hidden, back.activation) == ("mlp_sigmoid", 3, 2, "tanh")
    np.testing.assert_array_equal(back.params, m.params)
