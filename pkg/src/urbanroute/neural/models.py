"""Next-edge classifiers built from the layers, with exact gradients.

Every model maps a batch of inputs to candidate-slot logits and returns
``(loss, grads)`` for a masked cross-entropy objective. Sequence models
(``gru``, ``lstm``, ``transformer``) take ``(B, T, D)`` windows; the
others take ``(B, D)`` vectors.
"""
from __future__ import annotations

import math

import numpy as np

from .layers import (
    AttentionParams,
    AutoencoderParams,
    GruParams,
    LstmParams,
    MlpParams,
    glorot,
    sigmoid,
    softmax,
)
from .optim import cross_entropy_batch

MODEL_KINDS = ("mlp", "gru", "lstm", "autoencoder", "transformer")


class NextEdgeModel:
    kind = ""
    sequence = False
    param_names: tuple[str, ...] = ()

    def __init__(self, params: dict[str, np.ndarray], window: int = 1, meta: dict | None = None):
        missing = set(self.param_names) - set(params)
        if missing:
            raise ValueError(f"{self.kind}: missing parameters {sorted(missing)}")
        self.params = {k: np.asarray(params[k], dtype=float) for k in self.param_names}
        self.window = int(window)
        self.meta = dict(meta or {})
        self._validate()

    def _validate(self):
        pass

    @property
    def n_classes(self) -> int:
        raise NotImplementedError

    def logits(self, X) -> np.ndarray:
        raise NotImplementedError

    def loss_and_grad(self, X, labels, masks):
        raise NotImplementedError

    def _ce(self, logits, labels, masks):
        return cross_entropy_batch(logits, labels, masks)

    def shapes(self) -> dict[str, list[int]]:
        return {k: list(v.shape) for k, v in self.params.items()}


class MlpModel(NextEdgeModel):
    kind = "mlp"
    param_names = ("W1", "b1", "W2", "b2")

    def _validate(self):
        MlpParams(**self.params)

    @classmethod
    def create(cls, rng, n_in, n_out, hidden=64, **kw):
        return cls(MlpParams.init(rng, n_in, hidden, n_out).arrays(), **kw)

    @property
    def n_classes(self):
        return self.params["W2"].shape[0]

    def logits(self, X):
        p = self.params
        return np.maximum(X @ p["W1"].T + p["b1"], 0.0) @ p["W2"].T + p["b2"]

    def loss_and_grad(self, X, labels, masks):
        p = self.params
        a1 = X @ p["W1"].T + p["b1"]
        h = np.maximum(a1, 0.0)
        logits = h @ p["W2"].T + p["b2"]
        loss, dl = self._ce(logits, labels, masks)
        dh = dl @ p["W2"]
        da1 = dh * (a1 > 0)
        return loss, {"W1": da1.T @ X, "b1": da1.sum(0), "W2": dl.T @ h, "b2": dl.sum(0)}


class LstmModel(NextEdgeModel):
    kind = "lstm"
    sequence = True
    param_names = ("W_f", "W_i", "W_C", "W_o", "b_f", "b_i", "b_C", "b_o", "W_c", "b_c")

    def _validate(self):
        LstmParams(**{k: self.params[k] for k in self.param_names[:8]})

    @classmethod
    def create(cls, rng, n_in, n_out, hidden=64, **kw):
        params = LstmParams.init(rng, n_in, hidden).arrays()
        params["W_c"] = glorot(rng, n_out, hidden)
        params["b_c"] = np.zeros(n_out)
        return cls(params, **kw)

    @property
    def n_classes(self):
        return self.params["W_c"].shape[0]

    def _forward(self, X):
        p = self.params
        B, T, _ = X.shape
        H = p["W_f"].shape[0]
        h = np.zeros((B, H))
        C = np.zeros((B, H))
        cache = []
        for t in range(T):
            z = np.concatenate([h, X[:, t, :]], axis=1)
            f = sigmoid(z @ p["W_f"].T + p["b_f"])
            i = sigmoid(z @ p["W_i"].T + p["b_i"])
            cc = np.tanh(z @ p["W_C"].T + p["b_C"])
            o = sigmoid(z @ p["W_o"].T + p["b_o"])
            C_prev = C
            C = f * C_prev + i * cc
            tC = np.tanh(C)
            h = o * tC
            cache.append((z, f, i, cc, o, C_prev, tC))
        return h, cache

    def logits(self, X):
        h, _ = self._forward(np.asarray(X, dtype=float))
        return h @ self.params["W_c"].T + self.params["b_c"]

    def loss_and_grad(self, X, labels, masks):
        p = self.params
        h, cache = self._forward(X)
        logits = h @ p["W_c"].T + p["b_c"]
        loss, dl = self._ce(logits, labels, masks)
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        grads["W_c"] = dl.T @ h
        grads["b_c"] = dl.sum(0)
        H = h.shape[1]
        dh = dl @ p["W_c"]
        dC = np.zeros_like(dh)
        for z, f, i, cc, o, C_prev, tC in reversed(cache):
            do = dh * tC
            dC = dC + dh * o * (1.0 - tC * tC)
            da_f = dC * C_prev * f * (1.0 - f)
            da_i = dC * cc * i * (1.0 - i)
            da_c = dC * i * (1.0 - cc * cc)
            da_o = do * o * (1.0 - o)
            dz = np.zeros_like(z)
            for gate, da in (("f", da_f), ("i", da_i), ("C", da_c), ("o", da_o)):
                grads["W_" + gate] += da.T @ z
                grads["b_" + gate] += da.sum(0)
                dz += da @ p["W_" + gate]
            dh = dz[:, :H]
            dC = dC * f
        return loss, grads


class GruModel(NextEdgeModel):
    kind = "gru"
    sequence = True
    param_names = ("W_z", "W_r", "W_h", "b_z", "b_r", "b_h", "W_c", "b_c")

    def _validate(self):
        GruParams(**{k: self.params[k] for k in self.param_names[:6]})

    @classmethod
    def create(cls, rng, n_in, n_out, hidden=64, **kw):
        params = GruParams.init(rng, n_in, hidden).arrays()
        params["W_c"] = glorot(rng, n_out, hidden)
        params["b_c"] = np.zeros(n_out)
        return cls(params, **kw)

    @property
    def n_classes(self):
        return self.params["W_c"].shape[0]

    def _forward(self, X):
        p = self.params
        B, T, _ = X.shape
        H = p["W_z"].shape[0]
        h = np.zeros((B, H))
        cache = []
        for t in range(T):
            x = X[:, t, :]
            hx = np.concatenate([h, x], axis=1)
            z = sigmoid(hx @ p["W_z"].T + p["b_z"])
            r = sigmoid(hx @ p["W_r"].T + p["b_r"])
            rhx = np.concatenate([r * h, x], axis=1)
            c = np.tanh(rhx @ p["W_h"].T + p["b_h"])
            cache.append((h, hx, rhx, z, r, c))
            h = (1.0 - z) * h + z * c
        return h, cache

    def logits(self, X):
        h, _ = self._forward(np.asarray(X, dtype=float))
        return h @ self.params["W_c"].T + self.params["b_c"]

    def loss_and_grad(self, X, labels, masks):
        p = self.params
        h, cache = self._forward(X)
        logits = h @ p["W_c"].T + p["b_c"]
        loss, dl = self._ce(logits, labels, masks)
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        grads["W_c"] = dl.T @ h
        grads["b_c"] = dl.sum(0)
        H = h.shape[1]
        dh = dl @ p["W_c"]
        for h_prev, hx, rhx, z, r, c in reversed(cache):
            dz = dh * (c - h_prev)
            dc = dh * z
            dh_prev = dh * (1.0 - z)
            da_c = dc * (1.0 - c * c)
            grads["W_h"] += da_c.T @ rhx
            grads["b_h"] += da_c.sum(0)
            drh = (da_c @ p["W_h"])[:, :H]
            dr = drh * h_prev
            dh_prev += drh * r
            da_z = dz * z * (1.0 - z)
            da_r = dr * r * (1.0 - r)
            grads["W_z"] += da_z.T @ hx
            grads["b_z"] += da_z.sum(0)
            grads["W_r"] += da_r.T @ hx
            grads["b_r"] += da_r.sum(0)
            dh_prev += (da_z @ p["W_z"] + da_r @ p["W_r"])[:, :H]
            dh = dh_prev
        return loss, grads


class AutoencoderModel(NextEdgeModel):
    """Sigmoid autoencoder whose latent code also feeds a linear head.

    Loss is cross-entropy on the head plus ``recon_weight`` times the
    reconstruction MSE against the input rescaled from [-1, 1] to [0, 1].
    """

    kind = "autoencoder"
    param_names = ("W_e", "b_e", "W_d", "b_d", "W_c", "b_c")

    def _validate(self):
        AutoencoderParams(**{k: self.params[k] for k in self.param_names[:4]})
        self.recon_weight = float(self.meta.get("recon_weight", 1.0))

    @classmethod
    def create(cls, rng, n_in, n_out, hidden=16, **kw):
        params = AutoencoderParams.init(rng, n_in, hidden).arrays()
        params["W_c"] = glorot(rng, n_out, hidden)
        params["b_c"] = np.zeros(n_out)
        return cls(params, **kw)

    @property
    def n_classes(self):
        return self.params["W_c"].shape[0]

    def logits(self, X):
        p = self.params
        z = sigmoid(X @ p["W_e"].T + p["b_e"])
        return z @ p["W_c"].T + p["b_c"]

    def loss_and_grad(self, X, labels, masks):
        p = self.params
        z = sigmoid(X @ p["W_e"].T + p["b_e"])
        x_hat = sigmoid(z @ p["W_d"].T + p["b_d"])
        logits = z @ p["W_c"].T + p["b_c"]
        ce, dl = self._ce(logits, labels, masks)
        recon, dxh = reconstruction_mse(x_hat, X)
        loss = ce + self.recon_weight * recon
        da_d = self.recon_weight * dxh * x_hat * (1.0 - x_hat)
        dz = dl @ p["W_c"] + da_d @ p["W_d"]
        da_e = dz * z * (1.0 - z)
        return loss, {
            "W_e": da_e.T @ X, "b_e": da_e.sum(0),
            "W_d": da_d.T @ z, "b_d": da_d.sum(0),
            "W_c": dl.T @ z, "b_c": dl.sum(0),
        }


def reconstruction_mse(x_hat, X):
    """MSE of ``x_hat`` against ``X`` mapped from [-1, 1] to [0, 1], and d/dx_hat."""
    target = 0.5 * (np.asarray(X) + 1.0)
    diff = x_hat - target
    n = diff.size
    return float(np.sum(diff * diff) / n), 2.0 * diff / n


def reconstruction_loss_and_grad(p: AutoencoderParams, X):
    """Pure reconstruction objective for a bare autoencoder."""
    z = sigmoid(X @ p.W_e.T + p.b_e)
    x_hat = sigmoid(z @ p.W_d.T + p.b_d)
    loss, dxh = reconstruction_mse(x_hat, X)
    da_d = dxh * x_hat * (1.0 - x_hat)
    da_e = (da_d @ p.W_d) * z * (1.0 - z)
    return loss, {"W_e": da_e.T @ X, "b_e": da_e.sum(0), "W_d": da_d.T @ z, "b_d": da_d.sum(0)}


class TransformerModel(NextEdgeModel):
    """One self-attention block, mean-pooled, then a linear head."""

    kind = "transformer"
    sequence = True
    param_names = ("W_q", "W_k", "W_v", "W_c", "b_c")

    def _validate(self):
        AttentionParams(**self.params)

    @classmethod
    def create(cls, rng, n_in, n_out, hidden=64, d_k=16, **kw):
        return cls(AttentionParams.init(rng, n_in, d_k, hidden, n_out).arrays(), **kw)

    @property
    def n_classes(self):
        return self.params["W_c"].shape[0]

    def _pooled(self, X):
        p = self.params
        scale = 1.0 / math.sqrt(p["W_q"].shape[1])
        Q = X @ p["W_q"]
        K = X @ p["W_k"]
        V = X @ p["W_v"]
        A = softmax(np.einsum("btk,bsk->bts", Q, K) * scale, axis=-1)
        O = A @ V
        return O.mean(axis=1), (Q, K, V, A, scale)

    def logits(self, X):
        pooled, _ = self._pooled(np.asarray(X, dtype=float))
        return pooled @ self.params["W_c"].T + self.params["b_c"]

    def loss_and_grad(self, X, labels, masks):
        p = self.params
        pooled, (Q, K, V, A, scale) = self._pooled(X)
        logits = pooled @ p["W_c"].T + p["b_c"]
        loss, dl = self._ce(logits, labels, masks)
        T = X.shape[1]
        dpool = dl @ p["W_c"]
        dO = np.repeat(dpool[:, None, :] / T, T, axis=1)
        dA = dO @ np.swapaxes(V, 1, 2)
        dV = np.swapaxes(A, 1, 2) @ dO
        dS = A * (dA - np.sum(dA * A, axis=-1, keepdims=True)) * scale
        dQ = dS @ K
        dK = np.swapaxes(dS, 1, 2) @ Q
        return loss, {
            "W_q": np.einsum("btd,btk->dk", X, dQ),
            "W_k": np.einsum("btd,btk->dk", X, dK),
            "W_v": np.einsum("btd,btk->dk", X, dV),
            "W_c": dl.T @ pooled,
            "b_c": dl.sum(0),
        }


MODEL_CLASSES = {
    "mlp": MlpModel,
    "gru": GruModel,
    "lstm": LstmModel,
    "autoencoder": AutoencoderModel,
    "transformer": TransformerModel,
}

DEFAULT_HIDDEN = {"mlp": 64, "gru": 64, "lstm": 64, "autoencoder": 16, "transformer": 64}


def build_model(kind: str, n_in: int, n_out: int, seed: int = 0, hidden: int | None = None,
                window: int = 4, meta: dict | None = None) -> NextEdgeModel:
    """Freshly initialised model; non-sequence kinds always use window 1."""
    try:
        cls = MODEL_CLASSES[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}") from None
    rng = np.random.default_rng([seed, 0])
    hidden = DEFAULT_HIDDEN[kind] if hidden is None else hidden
    meta = dict(meta or {})
    meta.setdefault("hidden", hidden)
    meta.setdefault("seed", seed)
    return cls.create(rng, n_in, n_out, hidden=hidden,
                      window=window if cls.sequence else 1, meta=meta)
