"""Shared fixtures and fixture-model builders."""

import numpy as np
import pytest

from diffbound.config import load_config
from diffbound.cli import _train_model
from diffbound.denoiser import DenoiserNet, DiffusionModel, init_model
from diffbound.mlp import Mlp
from diffbound.schedule import NoiseSchedule, constant_schedule, from_betas


BOX2 = np.array([[-1.0, 1.0], [-1.0, 1.0]])


def make_null_model(schedule: NoiseSchedule, box=BOX2, hidden=(8,), time_embed_dim=4) -> DiffusionModel:
    """Model whose network predicts exactly zero noise (zeroed last layer).

    The backward mean is then the affine map x / sqrt(alpha_t), which makes
    every chain quantity closed-form checkable.
    """
    box = np.asarray(box, dtype=np.float64)
    dim = box.shape[0]
    m = init_model(schedule, box, hidden=hidden, time_embed_dim=time_embed_dim,
                   rng=np.random.default_rng(12345))
    mlp = m.net.mlp.copy()
    mlp.weights[-1][:] = 0.0
    mlp.biases[-1][:] = 0.0
    return DiffusionModel(schedule, DenoiserNet(mlp, dim, time_embed_dim), box)


def zero_sigma_schedule(alphas) -> NoiseSchedule:
    """Hand-built schedule with sigma = 0 at every step (test fixture only)."""
    alphas = np.asarray(alphas, dtype=np.float64)
    return NoiseSchedule(alphas, np.cumprod(alphas), np.zeros_like(alphas))


@pytest.fixture(scope="session")
def appendix_run():
    """The full-size trained model, shared by the expensive acceptance tests.

    Uses the stock config defaults (50000 training points, T=50, 20000 Adam
    steps), i.e. exactly what `diffbound train` with no config file does.
    Also reports the training wall time so budget checks can include it.
    """
    import time

    cfg = load_config()
    t0 = time.monotonic()
    model, trace = _train_model(cfg)
    seconds = time.monotonic() - t0
    return cfg, model, trace, seconds


@pytest.fixture(scope="session")
def small_trained_model():
    """A quickly trained small model for module-level integration checks."""
    from diffbound.data import uniform_square
    from diffbound.trainer import TrainConfig, train

    cfg = load_config(sets=(
        "schedule.T=8", "train.steps=1200", "data.n_train=4000", "net.hidden=32,32",
    ))
    data = uniform_square(cfg.n_train, cfg.side, np.random.default_rng(11))
    model0 = init_model(cfg.build_schedule(), data.domain_box, hidden=cfg.hidden,
                        time_embed_dim=cfg.time_embed_dim, rng=np.random.default_rng(12))
    model, trace = train(model0, data, TrainConfig(steps=cfg.steps, seed=13))
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(2026)


def random_schedule(rng: np.random.Generator, t_max: int = 64) -> NoiseSchedule:
    """A random valid schedule: random length, random betas in (0, 1)."""
    T = int(rng.integers(2, t_max + 1))
    return from_betas(rng.uniform(1e-5, 0.999, size=T))


def quick_constant_model(T=6, beta=0.1, hidden=(12,), seed=5) -> DiffusionModel:
    """Small randomly initialized (untrained) model on the unit box."""
    return init_model(constant_schedule(T, beta), BOX2, hidden=hidden,
                      time_embed_dim=4, rng=np.random.default_rng(seed))
