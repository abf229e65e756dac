"""Differentiable score functions with hand-written backpropagation.

Three architectures are supported:

``linear_raw``
    h(x) = w^T x (no bias; pairwise margins are bias-free anyway).
``linear_sigmoid``
    h(x) = sigmoid(w^T x).
``mlp_sigmoid``
    h(x) = sigmoid(v^T act(W x + b) + c) with a single hidden layer and a
    smooth activation (softplus by default, tanh optional).

Parameters are stored as one flat float64 vector.  For the MLP the layout is
``[W.ravel(), b, v, c]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ARCHS = ("linear_raw", "linear_sigmoid", "mlp_sigmoid")
ACTIVATIONS = ("softplus", "tanh")

# float64 sigmoid rounds to 0 or 1 for |z| beyond ~37 (top) and ~745 (bottom)
_H_LO = np.nextafter(0.0, 1.0)
_H_HI = np.nextafter(1.0, 0.0)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _act(z, kind):
    if kind == "softplus":
        return np.logaddexp(0.0, z), sigmoid(z)
    t = np.tanh(z)
    return t, 1.0 - t * t


def n_params(arch: str, input_dim: int, hidden: int = 0) -> int:
    if arch in ("linear_raw", "linear_sigmoid"):
        return input_dim
    if arch == "mlp_sigmoid":
        return hidden * input_dim + 2 * hidden + 1
    raise ValueError(f"unknown architecture {arch!r}")


@dataclass
class ScoreModel:
    """Score function h_w(x) over ``input_dim`` features.

    The model object is treated as immutable during evaluation; optimizers
    keep their own parameter vector and call the ``*_at`` helpers or build a
    new model with :meth:`with_params`.
    """

    arch: str
    input_dim: int
    params: np.ndarray
    hidden: int = 0
    activation: str = "softplus"

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.arch == "mlp_sigmoid" and self.hidden < 1:
            raise ValueError("mlp_sigmoid needs hidden >= 1")
        self.params = np.asarray(self.params, dtype=np.float64).ravel()
        expected = n_params(self.arch, self.input_dim, self.hidden)
        if self.params.size != expected:
            raise ValueError(
                f"params length {self.params.size} does not match {self.arch} "
                f"with input_dim={self.input_dim}, hidden={self.hidden} (expected {expected})"
            )

    @classmethod
    def init(cls, arch, input_dim, hidden=0, activation="softplus", seed=0):
        """Uniform init in [-r, r] with r = 1/sqrt(fan_in) per layer."""
        rng = np.random.default_rng(seed)
        if arch in ("linear_raw", "linear_sigmoid"):
            r = 1.0 / np.sqrt(input_dim)
            p = rng.uniform(-r, r, size=input_dim)
        elif arch == "mlp_sigmoid":
            r1 = 1.0 / np.sqrt(input_dim)
            r2 = 1.0 / np.sqrt(hidden)
            W = rng.uniform(-r1, r1, size=hidden * input_dim)
            b = rng.uniform(-r1, r1, size=hidden)
            v = rng.uniform(-r2, r2, size=hidden)
            c = rng.uniform(-r2, r2, size=1)
            p = np.concatenate([W, b, v, c])
        else:
            raise ValueError(f"unknown architecture {arch!r}")
        return cls(arch, input_dim, p, hidden=hidden, activation=activation)

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def capped(self) -> bool:
        return self.arch != "linear_raw"

    def with_params(self, params) -> "ScoreModel":
        return ScoreModel(self.arch, self.input_dim, np.array(params, dtype=np.float64),
                          hidden=self.hidden, activation=self.activation)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X2 = X[None, :] if single else X
        if X2.ndim != 2 or X2.shape[1] != self.input_dim:
            raise ValueError(
                f"dimension mismatch: expected {self.input_dim} features, got shape {X.shape}"
            )
        return X2, single

    def _unpack(self, w):
        H, d = self.hidden, self.input_dim
        W = w[: H * d].reshape(H, d)
        b = w[H * d: H * d + H]
        v = w[H * d + H: H * d + 2 * H]
        c = w[-1]
        return W, b, v, c

    # -- core evaluation ---------------------------------------------------

    def logits_at(self, w, X, with_grad=False):
        """Pre-sigmoid output and (optionally) its Jacobian, shape (n, p).

        For ``linear_raw`` the logit is the score itself.
        """
        X2, _ = self._check(X)
        w = np.asarray(w, dtype=np.float64)
        if self.arch in ("linear_raw", "linear_sigmoid"):
            z = X2 @ w
            return (z, X2.copy()) if with_grad else z
        W, b, v, c = self._unpack(w)
        pre = X2 @ W.T + b
        a, da = _act(pre, self.activation)
        z = a @ v + c
        if not with_grad:
            return z
        n = X2.shape[0]
        g_pre = da * v  # (n, H)
        gW = (g_pre[:, :, None] * X2[:, None, :]).reshape(n, -1)
        J = np.concatenate([gW, g_pre, a, np.ones((n, 1))], axis=1)
        return z, J

    def scores_at(self, w, X, with_grad=False):
        """Scores h_w(X) for a batch; with ``with_grad`` also the (n, p) Jacobian."""
        if not with_grad:
            z = self.logits_at(w, X)
            return z if self.arch == "linear_raw" else np.clip(sigmoid(z), _H_LO, _H_HI)
        z, J = self.logits_at(w, X, with_grad=True)
        if self.arch == "linear_raw":
            return z, J
        h = np.clip(sigmoid(z), _H_LO, _H_HI)
        return h, J * (h * (1.0 - h))[:, None]

    def scores(self, X, with_grad=False):
        return self.scores_at(self.params, X, with_grad=with_grad)

    def score(self, x) -> float:
        """Score of a single feature vector."""
        x2, _ = self._check(x)
        return float(self.scores(x2)[0])

    def score_grad(self, x) -> np.ndarray:
        """Gradient of h_w(x) with respect to the flat parameter vector."""
        x2, _ = self._check(x)
        return self.scores(x2, with_grad=True)[1][0]

    # -- checkpoint --------------------------------------------------------

    def to_record(self) -> dict:
        return {
            "arch": self.arch,
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "activation": self.activation,
            "params": [repr(float(p)) for p in self.params],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ScoreModel":
        params = np.array([float(p) for p in rec["params"]], dtype=np.float64)
        return cls(rec["arch"], int(rec["input_dim"]), params,
                   hidden=int(rec.get("hidden", 0)), activation=rec.get("activation", "softplus"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_record(), indent=1))

    @classmethod
    def load(cls, path) -> "ScoreModel":
        return cls.from_record(json.loads(Path(path).read_text()))


def pairloss_grad(model: ScoreModel, spec, x_pos, x_neg):
    """Pairwise surrogate L = l(h(x_pos) - h(x_neg)) and its parameter gradient."""
    from .losses import pairwise_loss

    X = np.vstack([np.asarray(x_pos, dtype=np.float64), np.asarray(x_neg, dtype=np.float64)])
    h, J = model.scores(X, with_grad=True)
    val, der = pairwise_loss(spec, h[0] - h[1])
    return float(val), float(der) * (J[0] - J[1])
