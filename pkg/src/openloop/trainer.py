"""Training loop: AdamW with decoupled weight decay and cosine-annealed LR.

Defaults follow the reference recipe: initial learning rate 4e-6, weight
decay 1e-2, 6 epochs, batch size 4, single cosine annealing over the whole
run with eta_min = 0.  Biases are exempt from weight decay.  Given the same
dataset, config, and seed, training is fully deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from openloop.dataio import Dataset
from openloop.model import LossConfig, Mlp, backward, encode_input


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 4e-6
    weight_decay: float = 1e-2
    epochs: int = 6
    batch_size: int = 4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self) -> None:
        if self.lr0 <= 0.0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be >= 0")


@dataclass
class TrainLog:
    """Per-step loss and learning rate, plus per-epoch mean losses."""

    losses: list[float] = field(default_factory=list)
    lrs: list[float] = field(default_factory=list)
    epoch_means: list[float] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("step,lr,loss\n")
            for step, (lr, value) in enumerate(zip(self.lrs, self.losses)):
                f.write(f"{step},{lr!r},{value!r}\n")


def cosine_lr(step: int, total_steps: int, lr0: float) -> float:
    """Single cosine annealing from lr0 down to zero across the run."""
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} out of range [0, {total_steps})")
    return 0.5 * lr0 * (1.0 + math.cos(math.pi * step / total_steps))


class AdamWState:
    """First/second moment estimates for every parameter tensor."""

    def __init__(self, net: Mlp):
        self.m_w = [np.zeros_like(w) for w in net.weights]
        self.v_w = [np.zeros_like(w) for w in net.weights]
        self.m_b = [np.zeros_like(b) for b in net.biases]
        self.v_b = [np.zeros_like(b) for b in net.biases]
        self.t = 0


def adamw_step(net: Mlp, state: AdamWState, lr: float, cfg: TrainConfig) -> None:
    """One decoupled-weight-decay Adam update from the net's gradient buffers.

    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p), with the
    decay term applied to weights only.
    """
    for layer, g in enumerate(net.grad_w + net.grad_b):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient in buffer {layer} "
                f"(|g|_max={np.max(np.abs(g))}, step {state.t + 1})"
            )
    state.t += 1
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    for params, grads, ms, vs, decay in (
        (net.weights, net.grad_w, state.m_w, state.v_w, cfg.weight_decay),
        (net.biases, net.grad_b, state.m_b, state.v_b, 0.0),
    ):
        for p, g, m, v in zip(params, grads, ms, vs):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
            if decay:
                update = update + decay * p
            p -= lr * update


def train(
    ds: Dataset,
    net: Mlp,
    cfg: TrainConfig = TrainConfig(),
    loss_cfg: LossConfig = LossConfig(),
) -> TrainLog:
    """Run the full schedule over the dataset, mutating the net in place.

    The last partial batch is kept; its gradient is averaged over the actual
    batch size.  Shuffling uses an RNG seeded from cfg.seed, so the whole
    run is reproducible.
    """
    if len(ds) == 0:
        raise ValueError("cannot train on an empty dataset")
    samples = list(ds.samples)
    inputs = [encode_input(s, net.mask) for s in samples]
    targets = [s.gt_future for s in samples]

    n = len(samples)
    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * steps_per_epoch
    rng = np.random.default_rng(cfg.seed)
    state = AdamWState(net)
    log = TrainLog()

    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            net.zero_grad()
            batch_loss = 0.0
            for idx in batch:
                value, _ = backward(net, inputs[idx], targets[idx], loss_cfg, accumulate=True)
                batch_loss += value
            scale = 1.0 / len(batch)
            for g in net.grad_w + net.grad_b:
                g *= scale
            lr = cosine_lr(step, total_steps, cfg.lr0)
            adamw_step(net, state, lr, cfg)
            log.losses.append(batch_loss * scale)
            log.lrs.append(lr)
            epoch_losses.append(batch_loss * scale)
            step += 1
        log.epoch_means.append(sum(epoch_losses) / len(epoch_losses))
    return log
