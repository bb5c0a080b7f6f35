"""Parameter containers and forward ops for the five model families.

Weights follow the column-vector convention ``W @ x`` (shape
``(out, in)``); inputs are row vectors or row batches, so the code
computes ``x @ W.T``. Everything is float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from ..errors import ShapeError


def sigmoid(x):
    # split form avoids overflow in exp for large |x|
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x):
    return np.maximum(x, 0.0)


def softmax(x, axis=-1):
    x = np.asarray(x, dtype=float)
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in))


class _Params:
    """Mixin: ordered name -> array view shared with the optimizer."""

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _check_bias(w, b, name):
    if b.shape != (w.shape[0],):
        raise ShapeError(f"{name}: bias shape {b.shape} does not match weight rows {w.shape[0]}")


def _check_in(x, n_in, name):
    if x.shape[-1] != n_in:
        raise ShapeError(f"{name}: input width {x.shape[-1]} != expected {n_in}")


# --- MLP ----------------------------------------------------------------------

@dataclass
class MlpParams(_Params):
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        _check_bias(self.W1, self.b1, "W1/b1")
        _check_bias(self.W2, self.b2, "W2/b2")
        if self.W2.shape[1] != self.W1.shape[0]:
            raise ShapeError(f"W2 expects {self.W2.shape[1]} hidden units, W1 gives {self.W1.shape[0]}")

    @classmethod
    def init(cls, rng, n_in, n_hidden, n_out):
        return cls(glorot(rng, n_hidden, n_in), np.zeros(n_hidden),
                   glorot(rng, n_out, n_hidden), np.zeros(n_out))


def mlp_forward(p: MlpParams, x) -> np.ndarray:
    """ReLU hidden layer, identity (logit) output."""
    x = np.asarray(x, dtype=float)
    _check_in(x, p.W1.shape[1], "mlp_forward")
    hidden = relu(x @ p.W1.T + p.b1)
    return hidden @ p.W2.T + p.b2


# --- LSTM ---------------------------------------------------------------------

@dataclass
class LstmParams(_Params):
    W_f: np.ndarray
    W_i: np.ndarray
    W_C: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_C: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        shape = self.W_f.shape
        for name in ("W_i", "W_C", "W_o"):
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} shape {getattr(self, name).shape} != W_f shape {shape}")
        for w, b in (("W_f", "b_f"), ("W_i", "b_i"), ("W_C", "b_C"), ("W_o", "b_o")):
            _check_bias(getattr(self, w), getattr(self, b), f"{w}/{b}")
        if shape[1] <= shape[0]:
            raise ShapeError("LSTM weights must act on [h, x] with a non-empty x")

    @property
    def hidden(self) -> int:
        return self.W_f.shape[0]

    @property
    def n_in(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    @classmethod
    def init(cls, rng, n_in, n_hidden):
        ws = [glorot(rng, n_hidden, n_hidden + n_in) for _ in range(4)]
        return cls(*ws, *(np.zeros(n_hidden) for _ in range(4)))


def lstm_gates(p: LstmParams, h_prev, x_t):
    """(f, i, C_tilde, o) for one step."""
    h_prev = np.asarray(h_prev, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    _check_in(x_t, p.n_in, "lstm_step")
    _check_in(h_prev, p.hidden, "lstm_step (h_prev)")
    z = np.concatenate([h_prev, x_t], axis=-1)
    f = sigmoid(z @ p.W_f.T + p.b_f)
    i = sigmoid(z @ p.W_i.T + p.b_i)
    c_tilde = np.tanh(z @ p.W_C.T + p.b_C)
    o = sigmoid(z @ p.W_o.T + p.b_o)
    return f, i, c_tilde, o


def lstm_step(p: LstmParams, h_prev, C_prev, x_t):
    """One LSTM step; returns ``(h_t, C_t)``."""
    f, i, c_tilde, o = lstm_gates(p, h_prev, x_t)
    C_prev = np.asarray(C_prev, dtype=float)
    if C_prev.shape != f.shape:
        raise ShapeError(f"lstm_step: C_prev shape {C_prev.shape} != {f.shape}")
    C_t = f * C_prev + i * c_tilde
    h_t = o * np.tanh(C_t)
    return h_t, C_t


# --- GRU ----------------------------------------------------------------------

@dataclass
class GruParams(_Params):
    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        shape = self.W_z.shape
        for name in ("W_r", "W_h"):
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} shape {getattr(self, name).shape} != W_z shape {shape}")
        for w, b in (("W_z", "b_z"), ("W_r", "b_r"), ("W_h", "b_h")):
            _check_bias(getattr(self, w), getattr(self, b), f"{w}/{b}")
        if shape[1] <= shape[0]:
            raise ShapeError("GRU weights must act on [h, x] with a non-empty x")

    @property
    def hidden(self) -> int:
        return self.W_z.shape[0]

    @property
    def n_in(self) -> int:
        return self.W_z.shape[1] - self.W_z.shape[0]

    @classmethod
    def init(cls, rng, n_in, n_hidden):
        ws = [glorot(rng, n_hidden, n_hidden + n_in) for _ in range(3)]
        return cls(*ws, *(np.zeros(n_hidden) for _ in range(3)))


def gru_gates(p: GruParams, h_prev, x_t):
    """(z, r, candidate) for one step."""
    h_prev = np.asarray(h_prev, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    _check_in(x_t, p.n_in, "gru_step")
    _check_in(h_prev, p.hidden, "gru_step (h_prev)")
    hx = np.concatenate([h_prev, x_t], axis=-1)
    z = sigmoid(hx @ p.W_z.T + p.b_z)
    r = sigmoid(hx @ p.W_r.T + p.b_r)
    cand = np.tanh(np.concatenate([r * h_prev, x_t], axis=-1) @ p.W_h.T + p.b_h)
    return z, r, cand


def gru_step(p: GruParams, h_prev, x_t):
    z, _, cand = gru_gates(p, h_prev, x_t)
    return (1.0 - z) * np.asarray(h_prev, dtype=float) + z * cand


# --- autoencoder --------------------------------------------------------------

@dataclass
class AutoencoderParams(_Params):
    W_e: np.ndarray
    b_e: np.ndarray
    W_d: np.ndarray
    b_d: np.ndarray

    def __post_init__(self):
        _check_bias(self.W_e, self.b_e, "W_e/b_e")
        _check_bias(self.W_d, self.b_d, "W_d/b_d")
        latent, n_in = self.W_e.shape
        if self.W_d.shape != (n_in, latent):
            raise ShapeError(f"decoder shape {self.W_d.shape} must be {(n_in, latent)}")
        if not latent < n_in:
            raise ShapeError(f"latent dim {latent} must be smaller than input dim {n_in}")

    @classmethod
    def init(cls, rng, n_in, n_latent):
        return cls(glorot(rng, n_latent, n_in), np.zeros(n_latent),
                   glorot(rng, n_in, n_latent), np.zeros(n_in))


def autoencode(p: AutoencoderParams, x):
    """Sigmoid encoder and decoder; returns ``(z, x_hat)``."""
    x = np.asarray(x, dtype=float)
    _check_in(x, p.W_e.shape[1], "autoencode")
    z = sigmoid(x @ p.W_e.T + p.b_e)
    x_hat = sigmoid(z @ p.W_d.T + p.b_d)
    return z, x_hat


# --- attention ----------------------------------------------------------------

@dataclass
class AttentionParams(_Params):
    W_q: np.ndarray
    W_k: np.ndarray
    W_v: np.ndarray
    W_c: np.ndarray
    b_c: np.ndarray

    def __post_init__(self):
        if self.W_q.shape != self.W_k.shape:
            raise ShapeError(f"W_q {self.W_q.shape} and W_k {self.W_k.shape} must match")
        if self.W_v.shape[0] != self.W_q.shape[0]:
            raise ShapeError("W_v must take the same input width as W_q")
        _check_bias(self.W_c, self.b_c, "W_c/b_c")
        if self.W_c.shape[1] != self.W_v.shape[1]:
            raise ShapeError(f"head expects {self.W_c.shape[1]} features, W_v gives {self.W_v.shape[1]}")

    @property
    def d_k(self) -> int:
        return self.W_q.shape[1]

    @classmethod
    def init(cls, rng, n_in, d_k, d_v, n_out):
        # projections act on the right (X @ W), so shapes are (in, out)
        return cls(glorot(rng, d_k, n_in).T.copy(), glorot(rng, d_k, n_in).T.copy(),
                   glorot(rng, d_v, n_in).T.copy(), glorot(rng, n_out, d_v), np.zeros(n_out))


def attention_weights(p: AttentionParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[-2] < 1:
        raise ShapeError("attention input needs at least one row")
    _check_in(X, p.W_q.shape[0], "scaled_dot_attention")
    Q = X @ p.W_q
    K = X @ p.W_k
    return softmax(Q @ np.swapaxes(K, -1, -2) / math.sqrt(p.d_k), axis=-1)


def scaled_dot_attention(p: AttentionParams, X) -> np.ndarray:
    """softmax(Q K^T / sqrt(d_k)) V over the rows of ``X``."""
    A = attention_weights(p, X)
    return A @ (np.asarray(X, dtype=float) @ p.W_v)
