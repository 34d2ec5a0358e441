"""Tests for the forward process: marginals, stepwise kernel, posterior, prior KL."""

import math

import numpy as np
import pytest

from conftest import random_schedule
from diffbound.forward import (
    forward_step,
    posterior_mean,
    prior_kl,
    sample_forward_marginal,
)
from diffbound.schedule import NoiseSchedule, from_betas, linear_schedule, schedule_lipschitz


def generic_gaussian_kl(mean, var, dim):
    """KL(N(mean, var I) || N(0, I)) from the textbook diagonal formula."""
    mean = np.asarray(mean, dtype=np.float64)
    sq = float(np.dot(mean, mean))
    return 0.5 * (dim * var + sq - dim - dim * math.log(var))


class TestMarginal:
    def test_moments_match_closed_form(self, rng):
        s = linear_schedule(20)
        x0 = np.array([0.7, -0.3])
        t = 9
        draws = np.stack([sample_forward_marginal(s, x0, t, rng) for _ in range(8)])
        # one big batch is faster than a python loop over single points
        big = sample_forward_marginal(s, np.tile(x0, (200_000, 1)), t, rng)
        ab = s.alpha_bar(t)
        se_mean = math.sqrt((1.0 - ab) / big.shape[0])
        assert np.all(np.abs(big.mean(axis=0) - math.sqrt(ab) * x0) < 3 * se_mean)
        var = big.var(axis=0)
        se_var = (1.0 - ab) * math.sqrt(2.0 / (big.shape[0] - 1))
        assert np.all(np.abs(var - (1.0 - ab)) < 3 * se_var)
        assert draws.shape == (8, 2)

    def test_low_noise_start_hugs_the_point(self, rng):
        s = linear_schedule(10, beta_start=1e-8, beta_end=1e-8)
        x0 = np.array([0.5, 0.5])
        x1 = sample_forward_marginal(s, np.tile(x0, (1000, 1)), 1, rng)
        assert np.max(np.abs(x1 - x0)) < 1e-3

    def test_terminal_marginal_is_near_standard_normal(self, rng):
        s = linear_schedule(50)  # alpha_bar_T ~ 7e-3
        x0 = np.array([1.0, 1.0])
        n = 200_000
        xT = sample_forward_marginal(s, np.tile(x0, (n, 1)), s.T, rng)
        ab = s.alpha_bar(s.T)
        assert np.all(np.abs(xT.mean(axis=0) - math.sqrt(ab)) < 3.5 / math.sqrt(n))
        assert np.all(np.abs(xT.var(axis=0) - (1.0 - ab)) < 3.5 * math.sqrt(2.0 / n))

    def test_same_seed_same_draw(self):
        s = linear_schedule(5)
        x0 = np.array([0.1, 0.2, 0.3])
        a = sample_forward_marginal(s, x0, 3, np.random.default_rng(7))
        b = sample_forward_marginal(s, x0, 3, np.random.default_rng(7))
        assert np.array_equal(a, b)

    def test_rejects_bad_points(self, rng):
        s = linear_schedule(5)
        with pytest.raises(ValueError):
            sample_forward_marginal(s, np.array([np.nan, 0.0]), 1, rng)
        with pytest.raises(ValueError):
            sample_forward_marginal(s, np.float64(1.0), 1, rng)

    def test_rejects_out_of_range_t(self, rng):
        s = linear_schedule(5)
        for t in (0, 6, -1):
            with pytest.raises(ValueError):
                sample_forward_marginal(s, np.zeros(2), t, rng)


class TestStepwise:
    def test_variance_recursion_reproduces_marginal(self):
        """Iterating v <- alpha v + (1 - alpha) from 0 gives 1 - alpha_bar."""
        s = random_schedule(np.random.default_rng(3), t_max=40)
        v = 0.0
        scale = 1.0
        for t in range(1, s.T + 1):
            a = s.alpha(t)
            v = a * v + (1.0 - a)
            scale *= math.sqrt(a)
            assert abs(v - (1.0 - s.alpha_bar(t))) < 1e-12
            assert abs(scale - math.sqrt(s.alpha_bar(t))) < 1e-12

    def test_composed_steps_match_marginal_moments(self, rng):
        s = from_betas([0.1, 0.3, 0.2, 0.4])
        x0 = np.full((200_000, 1), 0.8)
        x = x0
        for t in range(1, s.T + 1):
            x = forward_step(s, x, t, rng)
        ab = s.alpha_bar(s.T)
        n = x.shape[0]
        assert abs(float(x.mean()) - math.sqrt(ab) * 0.8) < 4 / math.sqrt(n)
        assert abs(float(x.var()) - (1.0 - ab)) < 4 * math.sqrt(2.0 / n)

    def test_step_moments(self, rng):
        s = from_betas([0.25, 0.5])
        prev = np.full((100_000, 2), 1.0)
        nxt = forward_step(s, prev, 2, rng)
        assert abs(float(nxt.mean()) - math.sqrt(0.5)) < 4 / math.sqrt(nxt.size)
        assert abs(float(nxt.var()) - 0.5) < 4 * math.sqrt(2.0 / nxt.size)


class TestPosteriorMean:
    def test_matches_gaussian_conditioning_oracle(self):
        """Independent derivation: complete the square in q(x_t|x_{t-1}) q(x_{t-1}|x_0).

        Posterior precision is alpha_t/(1-alpha_t) + 1/(1-alpha_bar_{t-1});
        the mean weights follow from the same computation.
        """
        rng = np.random.default_rng(42)
        for _ in range(200):
            s = random_schedule(rng, t_max=30)
            t = int(rng.integers(2, s.T + 1))
            x_t = rng.normal(size=3)
            x0 = rng.normal(size=3)
            a = s.alpha(t)
            ab_prev = s.alpha_bar(t - 1)
            prec = a / (1.0 - a) + 1.0 / (1.0 - ab_prev)
            oracle = (math.sqrt(a) * x_t / (1.0 - a)
                      + math.sqrt(ab_prev) * x0 / (1.0 - ab_prev)) / prec
            got = posterior_mean(s, x_t, x0, t)
            assert np.allclose(got, oracle, rtol=1e-10, atol=1e-12)

    def test_affine_slopes(self, rng):
        s = linear_schedule(12)
        t = 7
        x_t = rng.normal(size=4)
        x0 = rng.normal(size=4)
        dx = rng.normal(size=4)
        kp = schedule_lipschitz(s, t)
        base = posterior_mean(s, x_t, x0, t)
        shifted = posterior_mean(s, x_t + dx, x0, t)
        assert np.allclose(shifted - base, kp * dx, atol=1e-12)
        a = s.alpha(t)
        c0 = math.sqrt(s.alpha_bar(t - 1)) * (1.0 - a) / (1.0 - s.alpha_bar(t))
        shifted0 = posterior_mean(s, x_t, x0 + dx, t)
        assert np.allclose(shifted0 - base, c0 * dx, atol=1e-12)

    def test_hand_arithmetic_case(self):
        # alphas (1/2, 1/2): both coefficients equal sqrt(1/2) * (1/2) / (3/4)
        s = NoiseSchedule(np.array([0.5, 0.5]), np.array([0.5, 0.25]), np.zeros(2))
        w = math.sqrt(0.5) * (2.0 / 3.0)
        got = posterior_mean(s, np.array([3.0]), np.array([0.0]), 2)
        assert got == pytest.approx(3.0 * w, abs=1e-15)
        got = posterior_mean(s, np.array([0.0]), np.array([3.0]), 2)
        assert got == pytest.approx(3.0 * w, abs=1e-15)

    def test_broadcasts_over_batches(self, rng):
        s = linear_schedule(6)
        out = posterior_mean(s, rng.normal(size=(5, 4, 2)), rng.normal(size=(5, 4, 2)), 3)
        assert out.shape == (5, 4, 2)

    def test_rejects_t_one(self, rng):
        s = linear_schedule(6)
        with pytest.raises(ValueError):
            posterior_mean(s, np.zeros(2), np.zeros(2), 1)


class TestPriorKl:
    def test_against_generic_diagonal_formula(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            s = random_schedule(rng, t_max=20)
            dim = int(rng.integers(1, 6))
            x0 = rng.normal(size=dim)
            ab = s.alpha_bar(s.T)
            want = generic_gaussian_kl(math.sqrt(ab) * x0, 1.0 - ab, dim)
            assert prior_kl(s, x0) == pytest.approx(want, abs=1e-10)

    def test_explicit_two_dim_values(self):
        s = NoiseSchedule(np.array([0.5]), np.array([0.5]), np.array([0.0]))
        assert prior_kl(s, np.array([0.0, 0.0])) == pytest.approx(math.log(2) - 0.5, abs=1e-14)
        assert prior_kl(s, np.array([1.0, 0.0])) == pytest.approx(math.log(2) - 0.25, abs=1e-14)

    def test_batch_shape_and_scalar_type(self, rng):
        s = linear_schedule(8)
        out = prior_kl(s, rng.normal(size=(5, 3, 2)))
        assert out.shape == (5, 3)
        single = prior_kl(s, np.array([0.4, 0.4]))
        assert isinstance(single, float)

    def test_nonnegative(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            s = random_schedule(rng)
            x0 = rng.normal(size=int(rng.integers(1, 5)))
            assert prior_kl(s, x0) >= 0.0

    def test_grows_with_distance_from_origin(self):
        s = linear_schedule(10)
        near = prior_kl(s, np.array([0.1, 0.1]))
        far = prior_kl(s, np.array([3.0, 3.0]))
        assert far > near
