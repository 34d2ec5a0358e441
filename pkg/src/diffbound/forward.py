"""The fixed forward (noising) process.

Marginal sampling, the single-step forward kernel, the ground-truth backward
posterior mean, and the closed-form KL between the terminal marginal and the
standard-normal prior.  All functions broadcast over leading axes: points are
arrays of shape (..., D).
"""

from __future__ import annotations

import math

import numpy as np

from .schedule import NoiseSchedule, schedule_lipschitz

__all__ = [
    "sample_forward_marginal",
    "forward_step",
    "posterior_mean",
    "prior_kl",
]


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        raise ValueError("a point needs at least one coordinate axis")
    if not np.all(np.isfinite(x)):
        raise ValueError("point coordinates must be finite")
    return x


def sample_forward_marginal(s: NoiseSchedule, x0, t: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from q(x_t | x_0) = N(sqrt(alpha_bar_t) x_0, (1 - alpha_bar_t) I)."""
    x0 = _as_points(x0)
    ab = s.alpha_bar(t)
    eps = rng.standard_normal(x0.shape)
    return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps


def forward_step(s: NoiseSchedule, x_prev, t: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from the stepwise kernel q(x_t | x_{t-1}) = N(sqrt(alpha_t) x_{t-1}, (1 - alpha_t) I)."""
    x_prev = _as_points(x_prev)
    a = s.alpha(t)
    eps = rng.standard_normal(x_prev.shape)
    return math.sqrt(a) * x_prev + math.sqrt(1.0 - a) * eps


def posterior_mean(s: NoiseSchedule, x_t, x0, t: int) -> np.ndarray:
    """Mean of the ground-truth posterior q(x_{t-1} | x_t, x_0), t in [2, T].

    Affine in both arguments: the x_t coefficient is the schedule constant
    K'_t, the x0 coefficient is sqrt(alpha_bar_{t-1}) (1 - alpha_t)/(1 - alpha_bar_t).
    """
    x_t = _as_points(x_t)
    x0 = _as_points(x0)
    kp = schedule_lipschitz(s, t)
    a_t = s.alpha(t)
    ab_t = s.alpha_bar(t)
    ab_prev = s.alpha_bar(t - 1)
    c0 = math.sqrt(ab_prev) * (1.0 - a_t) / (1.0 - ab_t)
    return kp * x_t + c0 * x0


def prior_kl(s: NoiseSchedule, x0):
    """KL(q(x_T | x_0) || N(0, I)) in closed form.

    Returns a scalar for a single point, an array over leading axes for a
    batch.  The identity used is
    0.5 * (-D log(1 - alpha_bar_T) - D alpha_bar_T + alpha_bar_T ||x_0||^2),
    which equals the generic diagonal-Gaussian KL with mean
    sqrt(alpha_bar_T) x_0 and variance 1 - alpha_bar_T.
    """
    x0 = _as_points(x0)
    ab = s.alpha_bar(s.T)
    if ab >= 1.0:
        raise ValueError("alpha_bar_T must be below 1 for a finite prior KL")
    D = x0.shape[-1]
    sq = np.sum(x0 * x0, axis=-1)
    val = 0.5 * (-D * math.log1p(-ab) - D * ab + ab * sq)
    return float(val) if val.ndim == 0 else val
