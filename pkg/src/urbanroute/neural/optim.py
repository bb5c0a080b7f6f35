"""Losses, Adam, finite-difference gradient checking and the fit loop."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0 or not self.adam_eps > 0:
            raise ValueError("learning_rate and adam_eps must be positive")
        for b in (self.adam_beta1, self.adam_beta2):
            if not 0.0 < b < 1.0:
                raise ValueError(f"Adam beta {b} not in (0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


def cross_entropy_loss(logits, label: int, mask=None):
    """Masked softmax cross-entropy for one example.

    Masked classes get probability 0 and gradient 0.
    Returns ``(loss, dloss/dlogits)``.
    """
    logits = np.asarray(logits, dtype=float).reshape(-1)
    mask = np.ones(logits.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(-1)
    if mask.shape != logits.shape:
        raise ShapeError("mask and logits differ in length")
    if not 0 <= label < logits.size or not mask[label]:
        raise ValueError(f"label {label} is masked out or out of range")
    loss, grad = cross_entropy_batch(logits[None, :], np.array([label]), mask[None, :], reduce="sum")
    return loss, grad[0]


def cross_entropy_batch(logits, labels, masks, reduce: str = "mean"):
    """Batched masked cross-entropy; ``reduce`` is ``"mean"`` or ``"sum"``."""
    logits = np.asarray(logits, dtype=float)
    masks = np.asarray(masks, dtype=bool)
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    if not masks[np.arange(n), labels].all():
        raise ValueError("a label points at a masked class")
    z = np.where(masks, logits, -np.inf)
    zmax = z.max(axis=1, keepdims=True)
    e = np.where(masks, np.exp(z - zmax), 0.0)
    denom = e.sum(axis=1, keepdims=True)
    p = e / denom
    log_p_label = (z[np.arange(n), labels] - zmax[:, 0]) - np.log(denom[:, 0])
    grad = p.copy()
    grad[np.arange(n), labels] -= 1.0
    scale = 1.0 / n if reduce == "mean" else 1.0
    return float(-log_p_label.sum() * scale), grad * scale


class AdamState:
    """First and second moments, one pair per parameter name."""

    def __init__(self, params: Mapping[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step = 0


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              state: AdamState, cfg: TrainConfig, step: int) -> None:
    """In-place bias-corrected Adam update at 1-based ``step``."""
    if step < 1:
        raise ValueError("Adam step counts from 1")
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
    state.step = step


def grad_check(params: Mapping[str, np.ndarray],
               loss_fn: Callable[[], tuple[float, Mapping[str, np.ndarray]]],
               eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` closes over the data and reads ``params`` in place; it
    returns ``(loss, grads)``. Every parameter entry is perturbed.
    """
    _, analytic = loss_fn()
    analytic = {k: np.array(v, copy=True) for k, v in analytic.items()}
    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn()[0]
            flat[i] = orig - eps
            down = loss_fn()[0]
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            a = a_flat[i]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst


def fit(params: Mapping[str, np.ndarray],
        loss_and_grad: Callable[[np.ndarray], tuple[float, Mapping[str, np.ndarray]]],
        n_examples: int, cfg: TrainConfig) -> list[float]:
    """Minibatch Adam over example indices.

    Returns the full-data loss before training and after each epoch.
    Shuffling draws from ``cfg.seed`` so runs are bit-reproducible.
    """
    rng = np.random.default_rng([cfg.seed, 1])
    state = AdamState(params)
    everything = np.arange(n_examples)
    losses = [loss_and_grad(everything)[0]]
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n_examples)
        for lo in range(0, n_examples, cfg.batch_size):
            _, grads = loss_and_grad(order[lo:lo + cfg.batch_size])
            step += 1
            adam_step(params, grads, state, cfg, step)
        losses.append(loss_and_grad(everything)[0])
    return losses
