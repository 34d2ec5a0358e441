"""Noise schedules for the forward diffusion process.

A schedule is the sequence alpha_t = 1 - beta_t for t = 1..T together with
the running products alpha_bar_t and the backward-sampling standard
deviations sigma_t.  Everything is double precision and immutable; steps are
1-based throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseSchedule",
    "from_betas",
    "linear_schedule",
    "constant_schedule",
    "cosine_schedule",
    "posterior_variance",
    "schedule_lipschitz",
    "schedule_to_csv",
]

SIGMA_MODES = ("posterior", "beta")


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise levels of the forward process.

    ``alphas[t-1]`` holds alpha_t, ``alpha_bars[t-1]`` the product
    alpha_1 * ... * alpha_t, and ``sigmas[t-1]`` the standard deviation used
    by the stochastic backward steps.  sigma_1 is stored for completeness but
    never used: the final decoding step is deterministic.
    """

    alphas: np.ndarray
    alpha_bars: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        alphas = np.ascontiguousarray(np.asarray(self.alphas, dtype=np.float64))
        alpha_bars = np.ascontiguousarray(np.asarray(self.alpha_bars, dtype=np.float64))
        sigmas = np.ascontiguousarray(np.asarray(self.sigmas, dtype=np.float64))
        if alphas.ndim != 1 or alphas.size == 0:
            raise ValueError("schedule needs at least one step")
        if alpha_bars.shape != alphas.shape or sigmas.shape != alphas.shape:
            raise ValueError("alphas, alpha_bars and sigmas must share one shape")
        if not (np.all(alphas > 0.0) and np.all(alphas < 1.0)):
            raise ValueError("every alpha_t must lie strictly inside (0, 1)")
        if not (np.all(alpha_bars > 0.0) and np.all(alpha_bars < 1.0)):
            raise ValueError("every alpha_bar_t must lie strictly inside (0, 1)")
        if np.any(np.diff(alpha_bars) >= 0.0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if np.any(sigmas < 0.0) or not np.all(np.isfinite(sigmas)):
            raise ValueError("sigmas must be finite and nonnegative")
        for arr in (alphas, alpha_bars, sigmas):
            arr.flags.writeable = False
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", alpha_bars)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def T(self) -> int:
        return self.alphas.size

    def _check_t(self, t: int, lo: int = 1) -> int:
        t = int(t)
        if not lo <= t <= self.T:
            raise ValueError(f"step t={t} outside [{lo}, {self.T}]")
        return t

    def alpha(self, t: int) -> float:
        return float(self.alphas[self._check_t(t) - 1])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[self._check_t(t) - 1])

    def sigma(self, t: int) -> float:
        return float(self.sigmas[self._check_t(t) - 1])


def _sigmas_from(alphas: np.ndarray, alpha_bars: np.ndarray, mode: str) -> np.ndarray:
    if mode == "posterior":
        # sigma_t^2 = (1 - alpha_bar_{t-1})(1 - alpha_t)/(1 - alpha_bar_t);
        # reading alpha_bar_0 as 1 makes sigma_1 = 0 (the decode step is
        # deterministic anyway, so the stored value is inert).
        prev = np.concatenate(([1.0], alpha_bars[:-1]))
        var = (1.0 - prev) * (1.0 - alphas) / (1.0 - alpha_bars)
    elif mode == "beta":
        var = 1.0 - alphas
    else:
        raise ValueError(f"unknown sigma_mode {mode!r}; expected one of {SIGMA_MODES}")
    return np.sqrt(var)


def from_betas(betas, sigma_mode: str = "posterior") -> NoiseSchedule:
    """Build a schedule from an explicit beta_1..beta_T sequence."""
    betas = np.asarray(betas, dtype=np.float64)
    if betas.ndim != 1 or betas.size == 0:
        raise ValueError("betas must be a nonempty 1-D sequence (T >= 1)")
    if not (np.all(betas > 0.0) and np.all(betas < 1.0)):
        raise ValueError("every beta_t must lie strictly inside (0, 1)")
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    if alpha_bars[-1] <= 0.0:
        raise ValueError("alpha_bar underflowed to zero; schedule too aggressive")
    sigmas = _sigmas_from(alphas, alpha_bars, sigma_mode)
    return NoiseSchedule(alphas, alpha_bars, sigmas)


def linear_schedule(
    T: int,
    beta_start: float = 1e-4,
    beta_end: float = 0.2,
    sigma_mode: str = "posterior",
) -> NoiseSchedule:
    """Betas interpolated linearly from beta_start to beta_end over T steps."""
    T = int(T)
    if T < 1:
        raise ValueError("T must be at least 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    if T == 1:
        betas = np.array([beta_start])
    else:
        betas = np.linspace(beta_start, beta_end, T)
    return from_betas(betas, sigma_mode)


def constant_schedule(T: int, beta: float, sigma_mode: str = "posterior") -> NoiseSchedule:
    return linear_schedule(T, beta, beta, sigma_mode)


def cosine_schedule(T: int, offset: float = 0.008, sigma_mode: str = "posterior") -> NoiseSchedule:
    """Cosine-squared alpha_bar profile with the usual per-step beta cap."""
    T = int(T)
    if T < 1:
        raise ValueError("T must be at least 1")
    if offset <= 0.0:
        raise ValueError("offset must be positive")
    steps = np.arange(T + 1, dtype=np.float64)
    f = np.cos((steps / T + offset) / (1.0 + offset) * math.pi / 2.0) ** 2
    ratios = f[1:] / f[:-1]
    betas = np.clip(1.0 - ratios, 1e-8, 0.999)
    return from_betas(betas, sigma_mode)


def posterior_variance(s: NoiseSchedule, t: int) -> float:
    """Variance of the ground-truth backward posterior at step t in [2, T]."""
    t = s._check_t(t, lo=2)
    a_t = s.alphas[t - 1]
    ab_t = s.alpha_bars[t - 1]
    ab_prev = s.alpha_bars[t - 2]
    return float((1.0 - ab_prev) * (1.0 - a_t) / (1.0 - ab_t))


def schedule_lipschitz(s: NoiseSchedule, t: int) -> float:
    """Lipschitz constant K'_t of the posterior mean in x_t, for t in [2, T].

    Undefined at t = 1 (there is no alpha_bar_0 in the schedule); the decoder
    step gets its constant from empirical probing instead.
    """
    t = s._check_t(t, lo=2)
    a_t = s.alphas[t - 1]
    ab_t = s.alpha_bars[t - 1]
    ab_prev = s.alpha_bars[t - 2]
    return float(math.sqrt(a_t) * (1.0 - ab_prev) / (1.0 - ab_t))


def schedule_to_csv(s: NoiseSchedule) -> str:
    """Render the schedule as CSV.

    The k_prime column is empty at t = 1, where the constant is undefined.
    """
    lines = ["t,alpha,alpha_bar,sigma2,k_prime"]
    for t in range(1, s.T + 1):
        kp = repr(schedule_lipschitz(s, t)) if t >= 2 else ""
        sig2 = float(s.sigmas[t - 1]) ** 2
        lines.append(f"{t},{float(s.alphas[t - 1])!r},{float(s.alpha_bars[t - 1])!r},{sig2!r},{kp}")
    return "\n".join(lines) + "\n"
