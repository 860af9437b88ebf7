"""Least-squares training of a single sin network against the discrete system.

The objective on a batch of rows R is

    (1/|R|) sum_{j in R} |(M v_g - v_f)_j|^2 + mu sum ||W||_F^2

where v_g holds the complexified network output at all N nodes.  Batching
selects residual rows only; v_g is always evaluated everywhere because the
operator couples every row to every quadrature node.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .nn import AdamState, SinMlp, adam_step, backward, complexify, forward, lr_schedule
from .quadrature import apply_Kp_grid
from .system import SystemMatrix, SystemParams

__all__ = [
    "TrainConfig",
    "TrainRecord",
    "TrainingDivergedError",
    "batch_loss_and_grad",
    "full_loss",
    "train_single_grade",
    "validation_loss",
    "net_evaluator",
]


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 64
    mu: float = 0.0
    lr0: float = 1e-2
    lrF: float = 1e-7
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if not self.lr0 >= self.lrF > 0:
            raise ValueError("need lr0 >= lrF > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ValueError("invalid Adam constants")


@dataclass
class TrainRecord:
    epoch: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    def append(self, epoch, train_loss, val_loss, lr, seconds):
        self.epoch.append(epoch)
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.lr.append(lr)
        self.seconds.append(seconds)

    def __len__(self):
        return len(self.epoch)

    @property
    def best_val_epoch(self) -> int | None:
        vals = [v for v in self.val_loss if not math.isnan(v)]
        if not vals:
            return None
        return self.epoch[int(np.nanargmin(self.val_loss))]

    def rows(self):
        return zip(self.epoch, self.train_loss, self.val_loss, self.lr, self.seconds)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "val_loss", "lr", "seconds"])
            for e, tl, vl, lr, s in self.rows():
                w.writerow([e, repr(tl), repr(vl), repr(lr), f"{s:.6f}"])


def _regularizer(net: SinMlp) -> float:
    return float(sum(np.sum(W * W) for W, t in zip(net.weights, net.trainable) if t))


def _entries(M) -> np.ndarray:
    return M.entries if isinstance(M, SystemMatrix) else np.asarray(M)


def _loss_and_grad(net, inputs, A, target, rows, mu):
    out, tape = forward(net, inputs)
    v = complexify(out)
    Ar = A[rows]
    r = Ar @ v - target[rows]
    n = rows.size
    loss = float(np.vdot(r, r).real) / n
    g = (2.0 / n) * (Ar.conj().T @ r)
    grads = backward(net, tape, np.column_stack((g.real, g.imag)))
    if mu:
        loss += mu * _regularizer(net)
        for j, W in enumerate(net.weights):
            if grads.dW[j] is not None:
                grads.dW[j] += 2.0 * mu * W
    return loss, grads


def batch_loss_and_grad(net: SinMlp, M, v_f, rows, mu: float = 0.0, inputs=None):
    """Loss and gradients on the residual rows ``rows`` (0-based)."""
    A = _entries(M)
    N = A.shape[0]
    target = np.asarray(v_f, dtype=complex)
    if A.shape != (N, N) or target.shape != (N,):
        raise ValueError(f"matrix {A.shape} and right-hand side {target.shape} do not match")
    rows = np.asarray(rows, dtype=np.intp)
    if rows.ndim != 1 or rows.size == 0:
        raise ValueError("rows must be a nonempty 1-d index set")
    if rows.min() < 0 or rows.max() >= N:
        raise IndexError("row index out of range")
    if inputs is None:
        inputs = M.params.nodes if isinstance(M, SystemMatrix) else np.linspace(-1, 1, N)
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape[0] != N:
        raise ValueError(f"expected inputs for {N} nodes, got {inputs.shape[0]}")
    return _loss_and_grad(net, inputs, A, target, rows, mu)


def full_loss(net: SinMlp, M, v_f, mu: float = 0.0, inputs=None) -> float:
    A = _entries(M)
    if inputs is None:
        inputs = M.params.nodes
    v = complexify(forward(net, inputs)[0])
    r = A @ v - np.asarray(v_f, dtype=complex)
    return float(np.vdot(r, r).real) / r.size + mu * _regularizer(net)


def net_evaluator(net: SinMlp) -> Callable:
    return lambda t: complexify(forward(net, np.asarray(t, dtype=float))[0])


def validation_loss(Y: Callable, params: SystemParams, points, f_at_points) -> float:
    """Mean of |f - (I - lam K_p) Y|^2 over the validation points."""
    pts = np.asarray(points, dtype=float)
    f = np.asarray(f_at_points, dtype=complex)
    if pts.size == 0:
        return 0.0
    Yq = np.asarray(Y(params.spec.nodes), dtype=complex)
    resid = f - (np.asarray(Y(pts), dtype=complex) - params.lam * apply_Kp_grid(Yq, params.spec, pts))
    return float(np.mean(np.abs(resid) ** 2))


def _train_loop(net: SinMlp, inputs, M, target, config: TrainConfig,
                val_fn: Callable[[SinMlp], float] | None, label: str = "training") -> TrainRecord:
    A = _entries(M)
    N = A.shape[0]
    target = np.asarray(target, dtype=complex)
    if target.shape != (N,):
        raise ValueError(f"target must have length {N}")
    inputs = np.asarray(inputs, dtype=float)
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_net(net, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    hist = TrainRecord()
    t0 = time.perf_counter()
    bs = min(config.batch_size, N)
    for epoch in range(config.epochs):
        lr = lr_schedule(epoch, config.epochs, config.lr0, config.lrF)
        order = rng.permutation(N)
        for start in range(0, N, bs):
            rows = order[start : start + bs]
            loss, grads = _loss_and_grad(net, inputs, A, target, rows, config.mu)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"{label}: non-finite batch loss at epoch {epoch}, lr={lr:.3e}")
            adam_step(net, state, grads, lr)
        tl = full_loss(net, A, target, config.mu, inputs)
        if not math.isfinite(tl):
            raise TrainingDivergedError(f"{label}: non-finite training loss at epoch {epoch}, lr={lr:.3e}")
        vl = val_fn(net) if val_fn is not None else float("nan")
        hist.append(epoch, tl, vl, lr, time.perf_counter() - t0)
    return hist


def train_single_grade(net: SinMlp, M: SystemMatrix, v_f, config: TrainConfig,
                       validation=None) -> tuple[SinMlp, TrainRecord]:
    """Train ``net`` in place; ``validation`` is an optional (points, f-values) pair."""
    if net.dims[0] != 1 or net.dims[-1] != 2:
        raise ValueError("a single-grade network maps scalars to pairs")
    if min(net.dims) < 1:
        raise ValueError("zero-width layer")
    val_fn = None
    if validation is not None:
        pts, fv = validation
        val_fn = lambda n: validation_loss(net_evaluator(n), M.params, pts, fv)  # noqa: E731
    hist = _train_loop(net, M.params.nodes, M, v_f, config, val_fn)
    return net, hist
