"""Training loop for the noise-prediction network.

Standard denoising objective: corrupt a data point to a random step t, ask
the network for the noise, take the mean squared error.  Optimization is
Adam over the hand-written MLP gradients; everything is driven by one seeded
generator so runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SampleSet
from .denoiser import DiffusionModel
from .mlp import Mlp

__all__ = ["TrainConfig", "TrainingDiverged", "Adam", "loss_and_grad", "train", "loss_trace_to_csv"]


@dataclass(frozen=True)
class TrainConfig:
    n_train: int = 50000
    steps: int = 20000
    batch_size: int = 256
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.n_train < 1 or self.steps < 1 or self.batch_size < 1:
            raise ValueError("n_train, steps and batch_size must be positive")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ValueError("moment decay rates must lie in [0, 1)")
        if not self.adam_eps > 0.0:
            raise ValueError("adam_eps must be positive")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; usually the learning rate is too high."""

    def __init__(self, step: int, loss: float):
        super().__init__(
            f"training loss became non-finite ({loss}) at step {step}; "
            "lower the learning rate"
        )
        self.step = step
        self.loss = loss


class Adam:
    """Adam with bias correction, acting on lists of parameter arrays."""

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def loss_and_grad(mlp: Mlp, feats: np.ndarray, target: np.ndarray):
    """MSE between mlp(feats) and target, plus its parameter gradients."""
    out, cache = mlp.forward_cache(feats)
    r = out - target
    loss = float(np.mean(r * r))
    gw, gb = mlp.backward(cache, (2.0 / r.size) * r)
    return loss, gw, gb


def train(m: DiffusionModel, data: SampleSet, cfg: TrainConfig):
    """Fit the model's network to the data; returns (new model, loss trace).

    The input model is untouched.  Batch assembly draws, in fixed order per
    step, the data indices, the step indices t uniform on {1..T}, and the
    noise, all from one generator seeded by cfg.seed.
    """
    x0 = np.asarray(data.points, dtype=np.float64)
    if x0.ndim != 2 or x0.shape[1] != m.dim:
        raise ValueError("data dimension does not match model dimension")
    lo, hi = m.domain_box[:, 0], m.domain_box[:, 1]
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("training data must lie inside the model's domain_box")

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    sched = m.schedule
    sqrt_ab = np.sqrt(sched.alpha_bars)
    sqrt_1mab = np.sqrt(1.0 - sched.alpha_bars)
    n = x0.shape[0]
    B = cfg.batch_size

    mlp = m.net.mlp.copy()
    opt = Adam(
        mlp.weights + mlp.biases,
        lr=cfg.learning_rate,
        beta1=cfg.adam_beta1,
        beta2=cfg.adam_beta2,
        eps=cfg.adam_eps,
    )
    trace = np.empty(cfg.steps)
    for step in range(cfg.steps):
        idx = rng.integers(0, n, size=B)
        t = rng.integers(1, sched.T + 1, size=B)
        eps = rng.standard_normal((B, m.dim))
        x_t = sqrt_ab[t - 1, None] * x0[idx] + sqrt_1mab[t - 1, None] * eps
        feats = m.net.features(x_t, t)
        out, cache = mlp.forward_cache(feats)
        r = out - eps
        loss = float(np.mean(r * r))
        if not np.isfinite(loss):
            raise TrainingDiverged(step, loss)
        gw, gb = mlp.backward(cache, (2.0 / r.size) * r)
        opt.step(mlp.weights + mlp.biases, gw + gb)
        trace[step] = loss
    return m.with_mlp(mlp), trace


def loss_trace_to_csv(trace: np.ndarray) -> str:
    lines = ["step,loss"]
    for i, v in enumerate(np.asarray(trace, dtype=np.float64)):
        lines.append(f"{i},{float(v)!r}")
    return "\n".join(lines) + "\n"
