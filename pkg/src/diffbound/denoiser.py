"""The learned backward process.

A single noise-prediction network serves every step; the per-step mean comes
from the usual reparameterization of the predicted noise.  Step 1 is a
deterministic decode that clamps into the model's domain box, steps T..2 add
Gaussian noise at the schedule's sigma_t.  Also home to the empirical
Lipschitz prober used by the bound engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .mlp import Mlp
from .schedule import NoiseSchedule

__all__ = [
    "time_embedding",
    "DenoiserNet",
    "DiffusionModel",
    "init_model",
    "denoise_mean",
    "decode",
    "backward_step",
    "reconstruct",
    "generate",
    "probe_lipschitz",
    "estimate_lipschitz",
]

DEFAULT_PROBE_PAIRS = 4096
DEFAULT_PROBE_SCALES = (1e-2, 1e-1, 1.0)


def time_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal features of the step index; shape (..., dim), dim even."""
    dim = int(dim)
    if dim < 2 or dim % 2 != 0:
        raise ValueError("embedding dimension must be an even integer >= 2")
    half = dim // 2
    denom = max(half - 1, 1)
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / denom)
    ang = np.asarray(t, dtype=np.float64)[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


@dataclass(frozen=True)
class DenoiserNet:
    """Noise-prediction network: (x_t, embed(t)) -> predicted epsilon."""

    mlp: Mlp
    dim: int
    time_embed_dim: int

    def __post_init__(self):
        sizes = self.mlp.sizes
        if sizes[0] != self.dim + self.time_embed_dim:
            raise ValueError("network input width must equal dim + time_embed_dim")
        if sizes[-1] != self.dim:
            raise ValueError("network output width must equal dim")

    def features(self, x: np.ndarray, t) -> np.ndarray:
        """Flat (n, dim + embed) feature matrix for points x and steps t."""
        x = np.asarray(x, dtype=np.float64)
        lead = x.shape[:-1]
        tt = np.broadcast_to(np.asarray(t, dtype=np.float64), lead)
        emb = time_embedding(tt, self.time_embed_dim)
        feats = np.concatenate([x.reshape(lead + (self.dim,)), emb], axis=-1)
        return feats.reshape(-1, self.dim + self.time_embed_dim)

    def predict_noise(self, x: np.ndarray, t) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = self.mlp.apply(self.features(x, t))
        return out.reshape(x.shape)


@dataclass(frozen=True)
class DiffusionModel:
    """Schedule + denoiser + the bounding box of the instance space."""

    schedule: NoiseSchedule
    net: DenoiserNet
    domain_box: np.ndarray

    def __post_init__(self):
        box = np.ascontiguousarray(np.asarray(self.domain_box, dtype=np.float64))
        if box.shape != (self.net.dim, 2):
            raise ValueError("domain_box must have shape (D, 2) of per-dimension [lo, hi]")
        if not np.all(np.isfinite(box)):
            raise ValueError("domain_box must be bounded (finite entries)")
        if np.any(box[:, 0] > box[:, 1]):
            raise ValueError("domain_box lower bounds must not exceed upper bounds")
        box.flags.writeable = False
        object.__setattr__(self, "domain_box", box)

    @property
    def dim(self) -> int:
        return self.net.dim

    def clamp(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.domain_box[:, 0], self.domain_box[:, 1])

    def with_mlp(self, mlp: Mlp) -> "DiffusionModel":
        return replace(self, net=replace(self.net, mlp=mlp))


def init_model(
    schedule: NoiseSchedule,
    domain_box,
    hidden=(128, 128),
    time_embed_dim: int = 16,
    activation: str = "tanh",
    rng: np.random.Generator | None = None,
) -> DiffusionModel:
    """Fresh randomly initialized model over the given box."""
    if rng is None:
        rng = np.random.default_rng(0)
    box = np.asarray(domain_box, dtype=np.float64)
    dim = box.shape[0]
    sizes = [dim + time_embed_dim, *hidden, dim]
    net = DenoiserNet(Mlp.init(sizes, rng, activation), dim, time_embed_dim)
    return DiffusionModel(schedule, net, box)


def denoise_mean(m: DiffusionModel, x_t, t: int) -> np.ndarray:
    """Backward mean g at step t: (x_t - (1-alpha_t)/sqrt(1-alpha_bar_t) * eps_hat)/sqrt(alpha_t)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    a = m.schedule.alpha(t)
    ab = m.schedule.alpha_bar(t)
    eps_hat = m.net.predict_noise(x_t, t)
    return (x_t - (1.0 - a) / math.sqrt(1.0 - ab) * eps_hat) / math.sqrt(a)


def decode(m: DiffusionModel, x_1) -> np.ndarray:
    """Deterministic final step: backward mean at t=1, clamped into the box."""
    return m.clamp(denoise_mean(m, x_1, 1))


def backward_step(m: DiffusionModel, x_t, t: int, rng: np.random.Generator) -> np.ndarray:
    """One stochastic backward step for t in [2, T]."""
    t = int(t)
    if t < 2:
        raise ValueError("backward_step needs t >= 2; step 1 is decode")
    mean = denoise_mean(m, x_t, t)
    sig = m.schedule.sigma(t)
    return mean + sig * rng.standard_normal(mean.shape)


def reconstruct(m: DiffusionModel, x_T, rng: np.random.Generator) -> np.ndarray:
    """Run the whole backward chain from x_T down to a point in the box."""
    x = np.asarray(x_T, dtype=np.float64)
    for t in range(m.schedule.T, 1, -1):
        x = backward_step(m, x, t, rng)
    return decode(m, x)


def generate(m: DiffusionModel, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Sample from the model: prior draw N(0, I), then reconstruct."""
    shape = (m.dim,) if n is None else (int(n), m.dim)
    return reconstruct(m, rng.standard_normal(shape), rng)


def _sphere_offsets(n: int, dim: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    u = rng.standard_normal((n, dim))
    norms = np.linalg.norm(u, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        u[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(u, axis=1)
    return scale * u / norms[:, None]


def probe_lipschitz(fn, box: np.ndarray, n_pairs: int, pair_scale: float, rng: np.random.Generator) -> float:
    """Max difference quotient of fn over sampled (x, x + delta) pairs.

    x is uniform in the box, delta uniform on the sphere of radius
    pair_scale.  This is a lower estimate of the true Lipschitz constant.
    """
    n_pairs = int(n_pairs)
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if not pair_scale > 0.0:
        raise ValueError("pair_scale must be positive")
    box = np.asarray(box, dtype=np.float64)
    lo, hi = box[:, 0], box[:, 1]
    x = lo + (hi - lo) * rng.random((n_pairs, box.shape[0]))
    delta = _sphere_offsets(n_pairs, box.shape[0], pair_scale, rng)
    diff = np.linalg.norm(fn(x + delta) - fn(x), axis=-1)
    return float(np.max(diff) / pair_scale)


def estimate_lipschitz(
    m: DiffusionModel,
    t: int,
    n_pairs: int = DEFAULT_PROBE_PAIRS,
    pair_scale=DEFAULT_PROBE_SCALES,
    rng: np.random.Generator | None = None,
) -> float:
    """Probed Lipschitz estimate of the step-t map (decode when t = 1).

    pair_scale may be a single radius or a sequence of radii; the result is
    the max over all of them.
    """
    if rng is None:
        raise ValueError("estimate_lipschitz needs an explicit rng")
    t = int(t)
    if t == 1:
        fn = lambda x: decode(m, x)
    else:
        m.schedule._check_t(t)
        fn = lambda x: denoise_mean(m, x, t)
    scales = np.atleast_1d(np.asarray(pair_scale, dtype=np.float64))
    best = 0.0
    for s in scales:
        best = max(best, probe_lipschitz(fn, m.domain_box, n_pairs, float(s), rng))
    return best
