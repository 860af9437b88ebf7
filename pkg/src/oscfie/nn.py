"""Fully connected real networks with sin activations, written directly in numpy.

Batches are row-major: an input batch has shape (B, m_0) and the output
(B, 2).  A 1-d input array is treated as B scalar inputs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SinMlp",
    "ForwardTape",
    "Gradients",
    "AdamState",
    "init_he",
    "forward",
    "feature",
    "complexify",
    "backward",
    "adam_step",
    "lr_schedule",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1


@dataclass
class SinMlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    trainable: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        if not self.trainable:
            self.trainable = [True] * len(self.weights)
        if len(self.trainable) != len(self.weights):
            raise ValueError("trainable mask must have one entry per layer")
        for j, (W, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (W.shape[0],):
                raise ValueError(f"layer {j}: bias shape {b.shape} does not match {W.shape}")
            if j and W.shape[1] != self.weights[j - 1].shape[0]:
                raise ValueError(f"layer {j}: input width {W.shape[1]} != {self.weights[j - 1].shape[0]}")

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "SinMlp":
        return SinMlp([W.copy() for W in self.weights], [b.copy() for b in self.biases], list(self.trainable))

    def freeze(self, layers=None) -> None:
        for j in range(self.n_layers) if layers is None else layers:
            self.trainable[j] = False


@dataclass
class ForwardTape:
    activations: list[np.ndarray]  # a_0 (input) .. a_{n-1} (feature)
    preacts: list[np.ndarray]  # z_1 .. z_{n-1}


@dataclass
class Gradients:
    dW: list[np.ndarray | None]
    db: list[np.ndarray | None]


def init_he(dims, seed: int | np.random.Generator) -> SinMlp:
    """He-normal weights (std sqrt(2 / fan_in)) and zero biases."""
    dims = [int(d) for d in dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"invalid layer widths {dims}")
    if dims[-1] != 2:
        raise ValueError("the output layer must have width 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return SinMlp(weights, biases)


def _as_batch(net: SinMlp, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim <= 1:
        x = x.reshape(-1, 1)
    if x.shape[1] != net.dims[0]:
        raise ValueError(f"input width {x.shape[1]} != network input width {net.dims[0]}")
    return x


def forward(net: SinMlp, inputs) -> tuple[np.ndarray, ForwardTape]:
    a = _as_batch(net, inputs)
    acts, pre = [a], []
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ W.T + b
        a = np.sin(z)
        pre.append(z)
        acts.append(a)
    out = a @ net.weights[-1].T + net.biases[-1]
    return out, ForwardTape(acts, pre)


def feature(net: SinMlp, inputs) -> np.ndarray:
    """Output of the last hidden layer."""
    a = _as_batch(net, inputs)
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        a = np.sin(a @ W.T + b)
    return a


def complexify(pairs) -> np.ndarray:
    v = np.asarray(pairs, dtype=float)
    return v[..., 0] + 1j * v[..., 1]


def backward(net: SinMlp, tape: ForwardTape, output_cotangents) -> Gradients:
    """Gradient of sum(<cotangent, output>) with respect to trainable parameters."""
    g = np.asarray(output_cotangents, dtype=float)
    batch = tape.activations[0].shape[0]
    if g.shape != (batch, net.dims[-1]):
        raise ValueError(f"cotangent shape {g.shape} != {(batch, net.dims[-1])}")
    n = net.n_layers
    dW: list[np.ndarray | None] = [None] * n
    db: list[np.ndarray | None] = [None] * n
    first_trainable = next((j for j in range(n) if net.trainable[j]), n)
    for j in range(n - 1, first_trainable - 1, -1):
        if net.trainable[j]:
            dW[j] = g.T @ tape.activations[j]
            db[j] = g.sum(axis=0)
        if j > first_trainable:
            g = (g @ net.weights[j]) * np.cos(tape.preacts[j - 1])
    return Gradients(dW, db)


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: SinMlp, **kw) -> "AdamState":
        m = [[np.zeros_like(W), np.zeros_like(b)] if t else None
             for W, b, t in zip(net.weights, net.biases, net.trainable)]
        v = [[np.zeros_like(W), np.zeros_like(b)] if t else None
             for W, b, t in zip(net.weights, net.biases, net.trainable)]
        return cls(m, v, 0, **kw)


def adam_step(net: SinMlp, state: AdamState, grads: Gradients, lr: float) -> SinMlp:
    """Bias-corrected Adam update applied in place to the trainable layers."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1**state.step
    c2 = 1 - b2**state.step
    for j in range(net.n_layers):
        if not net.trainable[j] or grads.dW[j] is None:
            continue
        for k, (param, grad) in enumerate(((net.weights[j], grads.dW[j]), (net.biases[j], grads.db[j]))):
            m, v = state.m[j][k], state.v[j][k]
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad * grad
            param -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return net


def lr_schedule(epoch: int, total_epochs: int, lr0: float, lrF: float) -> float:
    """Geometric decay from lr0 at epoch 0 to lrF at the last epoch."""
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    if lr0 <= 0 or lrF <= 0:
        raise ValueError("learning rates must be positive")
    if total_epochs == 1:
        return lr0
    return lr0 * (lrF / lr0) ** (epoch / (total_epochs - 1))


def save_checkpoint(net: SinMlp, path) -> None:
    """Write ``net`` as an .npz container (layout documented in README)."""
    arrays = {
        "format_version": np.array(CHECKPOINT_VERSION),
        "dims": np.array(net.dims, dtype=np.int64),
        "trainable": np.array(net.trainable, dtype=bool),
    }
    for j, (W, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"W{j}"] = np.ascontiguousarray(W, dtype=np.float64)
        arrays[f"b{j}"] = np.ascontiguousarray(b, dtype=np.float64)
    with open(os.fspath(path), "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> SinMlp:
    with np.load(os.fspath(path)) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = data["dims"]
        n = len(dims) - 1
        weights = [data[f"W{j}"].copy() for j in range(n)]
        biases = [data[f"b{j}"].copy() for j in range(n)]
        trainable = [bool(t) for t in data["trainable"]]
    return SinMlp(weights, biases, trainable)
