"""The certified Wasserstein-1 bound and its statistical verification.

The bound on W1(data distribution, model distribution) decomposes into five
nonnegative terms:

  T1  average reconstruction loss over the sample,
  T2  (1/lambda) * (sum of prior KLs + log(1/delta)),
  T3  lambda * Delta^2 / (8 n),
  T4  (product of per-step Lipschitz factors) * average cross distance
      between terminal forward draws and prior draws,
  T5  (sum over t of sigma_t weighted by the product of earlier Lipschitz
      factors) * mean distance between two standard normal vectors.

Monte-Carlo estimators carry standard errors, are chunked over fixed
boundaries with one spawned rng stream per chunk, and reduce in chunk order,
so results do not depend on the worker count.  The contraction checkers at
the bottom turn the one-step and whole-chain coupling inequalities into
statistical tests with 3-standard-error slack.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .data import SampleSet, domain_diameter
from .denoiser import (
    DEFAULT_PROBE_PAIRS,
    DEFAULT_PROBE_SCALES,
    DiffusionModel,
    decode,
    denoise_mean,
    estimate_lipschitz,
    reconstruct,
)
from .forward import prior_kl
from .schedule import schedule_lipschitz

__all__ = [
    "CSV_HEADER",
    "McConfig",
    "BoundReport",
    "ContractionCheck",
    "gaussian_pair_distance",
    "lipschitz_factors",
    "recon_loss",
    "cross_distance_term",
    "wasserstein_bound",
    "lambda_sweep",
    "lambda_star",
    "reports_to_csv",
    "check_contraction",
    "check_iterated_contraction",
]

CSV_HEADER = (
    "lambda,delta,n,T,D,Delta,term_recon,term_kl,term_pac,"
    "term_cross,term_sigma,total,k_source,mode"
)

K_SOURCES = ("schedule", "probed")
MODES = ("monte-carlo", "closed-form")
K1_MODES = ("probe", "one")


@dataclass(frozen=True)
class McConfig:
    """Budgets for the Monte-Carlo estimators.

    n_cross and n_pair are total draw budgets (n_cross is split evenly over
    the sample).  chunk_size fixes the chunk boundaries of the estimators and
    therefore the random streams; changing it changes the exact draws,
    changing `workers` never does.
    """

    n_noise: int = 16
    n_chains: int = 1
    n_cross: int = 1_000_000
    n_pair: int = 1_000_000
    probe_pairs: int = DEFAULT_PROBE_PAIRS
    probe_scales: tuple = DEFAULT_PROBE_SCALES
    chunk_size: int = 65536
    workers: int = 1

    def __post_init__(self):
        if min(self.n_noise, self.n_chains, self.n_cross, self.n_pair) < 1:
            raise ValueError("MC budgets must be positive")
        if self.probe_pairs < 1 or self.chunk_size < 1 or self.workers < 1:
            raise ValueError("probe_pairs, chunk_size and workers must be positive")


@dataclass(frozen=True)
class BoundReport:
    """One evaluated bound: the five terms plus everything needed to rerun it."""

    lam: float
    delta: float
    n: int
    T: int
    D: int
    Delta: float
    term_recon: float
    term_kl: float
    term_pac: float
    term_cross: float
    term_sigma: float
    total: float
    k_values: tuple
    k_provenance: tuple
    k_source: str
    mode: str
    total_se: float
    estimator_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ValueError("lambda must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        terms = (self.term_recon, self.term_kl, self.term_pac, self.term_cross, self.term_sigma)
        if any(t < 0.0 for t in terms):
            raise ValueError("bound terms must be nonnegative")
        if self.total != math.fsum(terms):
            raise ValueError("total must equal the exact sum of the five terms")
        if self.k_source not in K_SOURCES:
            raise ValueError(f"k_source must be one of {K_SOURCES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "delta": self.delta,
            "n": self.n,
            "T": self.T,
            "D": self.D,
            "Delta": self.Delta,
            "term_recon": self.term_recon,
            "term_kl": self.term_kl,
            "term_pac": self.term_pac,
            "term_cross": self.term_cross,
            "term_sigma": self.term_sigma,
            "total": self.total,
            "k_values": list(self.k_values),
            "k_provenance": list(self.k_provenance),
            "k_source": self.k_source,
            "mode": self.mode,
            "total_se": self.total_se,
            "estimator_meta": self.estimator_meta,
        }

    def csv_row(self) -> str:
        cells = [
            repr(float(self.lam)),
            repr(float(self.delta)),
            str(self.n),
            str(self.T),
            str(self.D),
            repr(float(self.Delta)),
            repr(float(self.term_recon)),
            repr(float(self.term_kl)),
            repr(float(self.term_pac)),
            repr(float(self.term_cross)),
            repr(float(self.term_sigma)),
            repr(float(self.total)),
            self.k_source,
            self.mode,
        ]
        return ",".join(cells)


def reports_to_csv(reports: Sequence[BoundReport]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv_row() for r in reports]) + "\n"


def gaussian_pair_distance(D: int):
    """(exact, bound) for the mean distance between two standard normals.

    The difference of two independent N(0, I_D) vectors is N(0, 2 I_D), whose
    mean norm is 2 * Gamma((D+1)/2) / Gamma(D/2); the companion upper bound
    sqrt(2 D) follows from Jensen.
    """
    D = int(D)
    if D < 1:
        raise ValueError("D must be >= 1")
    exact = math.exp(math.log(2.0) + gammaln((D + 1) / 2.0) - gammaln(D / 2.0))
    return exact, math.sqrt(2.0 * D)


def _map_chunks(work, args, workers: int):
    """Run work over args, preserving order; thread pool only when asked."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, args))
    return [work(a) for a in args]


def _row_chunks(n: int, per: int, chunk_size: int):
    rows = max(1, chunk_size // max(per, 1))
    return [(i, min(i + rows, n)) for i in range(0, n, rows)]


def _pooled(means: np.ndarray, variances, per: int):
    """Mean over rows plus the standard error of that mean.

    With per > 1 inner draws per row the within-row variances pool into
    se^2 = sum_i var_i / (per * n^2); with a single draw per row we fall back
    to the spread across rows, which over-counts real heterogeneity and is
    therefore conservative.
    """
    n = means.size
    value = float(np.mean(means))
    if variances is not None and per > 1:
        se = math.sqrt(float(np.sum(variances)) / per) / n
    elif n > 1:
        se = float(np.std(means, ddof=1)) / math.sqrt(n)
    else:
        se = 0.0
    return value, se


def _recon_batch(m: DiffusionModel, X0: np.ndarray, n_noise: int, n_chains: int,
                 rng: np.random.Generator, chunk_size: int, workers: int):
    """Per-sample reconstruction losses, pooled into (value, se)."""
    n, D = X0.shape
    per = n_noise * n_chains
    ab = m.schedule.alpha_bar(m.schedule.T)
    ranges = _row_chunks(n, per, chunk_size)
    streams = rng.spawn(len(ranges))

    def work(task):
        (i0, i1), r = task
        x0 = X0[i0:i1]
        rows = i1 - i0
        eps = r.standard_normal((rows, n_noise, D))
        x_T = math.sqrt(ab) * x0[:, None, :] + math.sqrt(1.0 - ab) * eps
        x_T = np.repeat(x_T, n_chains, axis=1)
        xhat = reconstruct(m, x_T.reshape(-1, D), r).reshape(rows, per, D)
        d = np.linalg.norm(xhat - x0[:, None, :], axis=2)
        var = d.var(axis=1, ddof=1) if per > 1 else None
        return d.mean(axis=1), var

    parts = _map_chunks(work, list(zip(ranges, streams)), workers)
    means = np.concatenate([p[0] for p in parts])
    variances = None if per == 1 else np.concatenate([p[1] for p in parts])
    return *_pooled(means, variances, per), means


def recon_loss(m: DiffusionModel, x0, n_noise: int = 16, n_chains: int = 1,
               rng: np.random.Generator | None = None):
    """MC estimate of the reconstruction loss of one point: (value, se).

    Averages the distance from x0 to full backward reconstructions over
    n_noise terminal draws and n_chains chains per draw.
    """
    if rng is None:
        raise ValueError("recon_loss needs an explicit rng")
    if n_noise < 1 or n_chains < 1:
        raise ValueError("n_noise and n_chains must be >= 1")
    X0 = np.asarray(x0, dtype=np.float64).reshape(1, -1)
    value, se, _ = _recon_batch(m, X0, n_noise, n_chains, rng, chunk_size=1 << 30, workers=1)
    return value, se


def _cross_closed_form(alpha_bar_T: float, x0_sqnorm, D: int):
    return np.sqrt(alpha_bar_T * np.asarray(x0_sqnorm) + (2.0 - alpha_bar_T) * D)


def _cross_batch(m: DiffusionModel, X0: np.ndarray, mode: str, n_total: int,
                 rng: np.random.Generator, chunk_size: int, workers: int):
    """Average over the sample of E||x_T - y_T||: (value, se, draws per point)."""
    n, D = X0.shape
    ab = m.schedule.alpha_bar(m.schedule.T)
    if mode == "closed-form":
        vals = _cross_closed_form(ab, np.sum(X0 * X0, axis=1), D)
        return float(np.mean(vals)), 0.0, 0
    per = max(1, n_total // n)
    ranges = _row_chunks(n, per, chunk_size)
    streams = rng.spawn(len(ranges))

    def work(task):
        (i0, i1), r = task
        x0 = X0[i0:i1]
        rows = i1 - i0
        x_T = math.sqrt(ab) * x0[:, None, :] + math.sqrt(1.0 - ab) * r.standard_normal((rows, per, D))
        y_T = r.standard_normal((rows, per, D))
        d = np.linalg.norm(x_T - y_T, axis=2)
        var = d.var(axis=1, ddof=1) if per > 1 else None
        return d.mean(axis=1), var

    parts = _map_chunks(work, list(zip(ranges, streams)), workers)
    means = np.concatenate([p[0] for p in parts])
    variances = None if per == 1 else np.concatenate([p[1] for p in parts])
    value, se = _pooled(means, variances, per)
    return value, se, per


def cross_distance_term(m: DiffusionModel, x0, mode: str = "monte-carlo",
                        n_mc: int = 10000, rng: np.random.Generator | None = None):
    """E||x_T - y_T|| for one data point, x_T ~ forward marginal, y_T ~ prior.

    closed-form mode returns the analytic upper bound
    sqrt(alpha_bar_T ||x0||^2 + (2 - alpha_bar_T) D); monte-carlo mode
    returns (value, se) from n_mc paired draws.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    X0 = np.asarray(x0, dtype=np.float64).reshape(1, -1)
    if mode == "closed-form":
        value, se, _ = _cross_batch(m, X0, mode, 0, np.random.default_rng(0), 1, 1)
        return value, se
    if rng is None:
        raise ValueError("cross_distance_term needs an explicit rng in monte-carlo mode")
    value, se, _ = _cross_batch(m, X0, mode, int(n_mc), rng, chunk_size=1 << 30, workers=1)
    return value, se


def _pair_distance_mc(D: int, n_total: int, rng: np.random.Generator,
                      chunk_size: int, workers: int):
    """MC estimate of the mean distance between two standard normals."""
    edges = [(i, min(i + chunk_size, n_total)) for i in range(0, n_total, chunk_size)]
    streams = rng.spawn(len(edges))

    def work(task):
        (i0, i1), r = task
        c = i1 - i0
        d = np.linalg.norm(r.standard_normal((c, D)) - r.standard_normal((c, D)), axis=1)
        return c, float(np.sum(d)), float(np.sum(d * d))

    parts = _map_chunks(work, list(zip(edges, streams)), workers)
    count = sum(p[0] for p in parts)
    total = math.fsum(p[1] for p in parts)
    sq = math.fsum(p[2] for p in parts)
    value = total / count
    var = max(0.0, (sq - count * value * value) / max(count - 1, 1))
    return value, math.sqrt(var / count)


def lipschitz_factors(m: DiffusionModel, k_source: str, rng: np.random.Generator,
                      k1_mode: str = "probe", n_pairs: int = DEFAULT_PROBE_PAIRS,
                      pair_scales=DEFAULT_PROBE_SCALES):
    """Per-step Lipschitz factors K_1..K_T plus per-step provenance.

    k_source "schedule" uses the schedule constants K'_t for t >= 2;
    "probed" probes the network at every step.  Step 1 has no schedule
    constant, so it is probed on decode (k1_mode "probe") or pinned to the
    conservative 1.0 (k1_mode "one").  The probed step-1 value is returned
    either way, as the third element, so reports can surface the gap.
    """
    if k_source not in K_SOURCES:
        raise ValueError(f"k_source must be one of {K_SOURCES}")
    if k1_mode not in K1_MODES:
        raise ValueError(f"k1_mode must be one of {K1_MODES}")
    T = m.schedule.T
    k = np.empty(T)
    prov = []
    k1_probe = estimate_lipschitz(m, 1, n_pairs, pair_scales, rng)
    if k1_mode == "probe":
        k[0] = k1_probe
        prov.append("probed")
    else:
        k[0] = 1.0
        prov.append("fixed")
    for t in range(2, T + 1):
        if k_source == "schedule":
            k[t - 1] = schedule_lipschitz(m.schedule, t)
            prov.append("schedule")
        else:
            k[t - 1] = estimate_lipschitz(m, t, n_pairs, pair_scales, rng)
            prov.append("probed")
    return k, tuple(prov), float(k1_probe)


def _k_products(k: np.ndarray, sigmas: np.ndarray):
    """(product of all k, sum over t>=2 of prod(k_1..k_{t-1}) sigma_t), in log space."""
    logk = np.log(k)
    prod_all = float(np.exp(np.sum(logk)))
    T = k.size
    if T < 2:
        return prod_all, 0.0
    prefix = np.exp(np.cumsum(logk)[: T - 1])
    return prod_all, float(np.sum(prefix * sigmas[1:]))


@dataclass(frozen=True)
class _Terms:
    t1: float
    t1_se: float
    kl_sum: float
    prod_k: float
    sigma_weight: float
    cross_avg: float
    cross_se: float
    pair_value: float
    pair_se: float
    k: tuple
    prov: tuple
    meta: dict


def _bound_terms(m: DiffusionModel, S: SampleSet, rng: np.random.Generator,
                 k_source: str, mode: str, mc: McConfig, k1_mode: str) -> _Terms:
    X0 = S.points
    if X0.shape[1] != m.dim:
        raise ValueError("sample dimension does not match model dimension")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    n, D = X0.shape
    r_probe, r_recon, r_cross, r_pair = rng.spawn(4)

    k, prov, k1_probe = lipschitz_factors(
        m, k_source, r_probe, k1_mode, mc.probe_pairs, mc.probe_scales
    )
    prod_k, sigma_weight = _k_products(k, m.schedule.sigmas)

    t1, t1_se, _ = _recon_batch(m, X0, mc.n_noise, mc.n_chains, r_recon, mc.chunk_size, mc.workers)
    kl_sum = float(np.sum(prior_kl(m.schedule, X0)))
    cross_avg, cross_se, per_cross = _cross_batch(m, X0, mode, mc.n_cross, r_cross, mc.chunk_size, mc.workers)
    if mode == "closed-form":
        pair_value, pair_se = gaussian_pair_distance(D)[1], 0.0
        n_pair_used = 0
    else:
        pair_value, pair_se = _pair_distance_mc(D, mc.n_pair, r_pair, mc.chunk_size, mc.workers)
        n_pair_used = mc.n_pair

    meta = {
        "n_noise": mc.n_noise,
        "n_chains": mc.n_chains,
        "cross_draws_per_point": per_cross,
        "pair_draws": n_pair_used,
        "probe_pairs": mc.probe_pairs,
        "probe_scales": list(np.atleast_1d(np.asarray(mc.probe_scales, dtype=np.float64))),
        "chunk_size": mc.chunk_size,
        "k1_mode": k1_mode,
        "k1_probed": k1_probe,
        "recon_se": t1_se,
        "cross_se": cross_se,
        "pair_se": pair_se,
        "kl_sum": kl_sum,
    }
    return _Terms(t1, t1_se, kl_sum, prod_k, sigma_weight, cross_avg, cross_se,
                  pair_value, pair_se, tuple(float(v) for v in k), prov, meta)


def _assemble(terms: _Terms, m: DiffusionModel, n: int, lam: float, delta: float,
              k_source: str, mode: str, extra_meta: dict | None) -> BoundReport:
    lam = float(lam)
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    # Delta^2 as the sum of squared box sides: exact where the diameter's
    # square root would not be (e.g. 8.0 for the side-2 square).
    sides = m.domain_box[:, 1] - m.domain_box[:, 0]
    delta_sq = float(np.dot(sides, sides))
    Delta = math.sqrt(delta_sq)
    t2 = (terms.kl_sum + math.log(1.0 / delta)) / lam
    t3 = lam * delta_sq / (8.0 * n)
    t4 = terms.prod_k * terms.cross_avg
    t5 = terms.sigma_weight * terms.pair_value
    total = math.fsum((terms.t1, t2, t3, t4, t5))
    total_se = math.sqrt(
        terms.t1_se**2 + (terms.prod_k * terms.cross_se) ** 2 + (terms.sigma_weight * terms.pair_se) ** 2
    )
    meta = dict(terms.meta)
    if extra_meta:
        meta.update(extra_meta)
    return BoundReport(
        lam=lam,
        delta=float(delta),
        n=n,
        T=m.schedule.T,
        D=m.dim,
        Delta=Delta,
        term_recon=terms.t1,
        term_kl=t2,
        term_pac=t3,
        term_cross=t4,
        term_sigma=t5,
        total=total,
        k_values=terms.k,
        k_provenance=terms.prov,
        k_source=k_source,
        mode=mode,
        total_se=total_se,
        estimator_meta=meta,
    )


def lambda_sweep(m: DiffusionModel, S: SampleSet, lambdas, delta: float = 0.05,
                 rng: np.random.Generator | None = None, k_source: str = "schedule",
                 mode: str = "monte-carlo", mc: McConfig | None = None,
                 k1_mode: str = "probe", extra_meta: dict | None = None) -> list[BoundReport]:
    """Evaluate the bound once per lambda, reusing the lambda-independent terms."""
    if rng is None:
        raise ValueError("lambda_sweep needs an explicit rng")
    lambdas = [float(v) for v in np.atleast_1d(np.asarray(lambdas, dtype=np.float64))]
    if not lambdas:
        raise ValueError("need at least one lambda")
    if any(v <= 0.0 for v in lambdas):
        raise ValueError("every lambda must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if S.n < 1:
        raise ValueError("sample set must be nonempty")
    mc = mc or McConfig()
    terms = _bound_terms(m, S, rng, k_source, mode, mc, k1_mode)
    return [_assemble(terms, m, S.n, lam, delta, k_source, mode, extra_meta) for lam in lambdas]


def wasserstein_bound(m: DiffusionModel, S: SampleSet, lam: float, delta: float = 0.05,
                      rng: np.random.Generator | None = None, k_source: str = "schedule",
                      mode: str = "monte-carlo", mc: McConfig | None = None,
                      k1_mode: str = "probe", extra_meta: dict | None = None) -> BoundReport:
    """Single-lambda certified upper bound on W1(data, model); see module doc."""
    return lambda_sweep(m, S, [lam], delta, rng, k_source, mode, mc, k1_mode, extra_meta)[0]


def lambda_star(m: DiffusionModel, S: SampleSet, delta: float = 0.05) -> float:
    """The lambda minimizing T2 + T3: sqrt(8 n (sum KL + log(1/delta))) / Delta."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    kl_sum = float(np.sum(prior_kl(m.schedule, S.points)))
    Delta = domain_diameter(m.domain_box)
    if Delta == 0.0:
        raise ValueError("degenerate domain_box: lambda_star undefined at Delta = 0")
    return math.sqrt(8.0 * S.n * (kl_sum + math.log(1.0 / delta))) / Delta


@dataclass(frozen=True)
class ContractionCheck:
    """Verdict of one statistical contraction test."""

    kind: str
    t: int | None
    n_trials: int
    passed: bool
    worst_margin: float
    details: dict = field(default_factory=dict)


def _box_pairs(m: DiffusionModel, n_trials: int, rng: np.random.Generator):
    lo, hi = m.domain_box[:, 0], m.domain_box[:, 1]
    X = lo + (hi - lo) * rng.random((n_trials, m.dim))
    Y = lo + (hi - lo) * rng.random((n_trials, m.dim))
    return X, Y


def check_contraction(m: DiffusionModel, t: int, n_trials: int = 10000,
                      rng: np.random.Generator | None = None, n_noise: int = 256,
                      k_hat: float | None = None, probe_pairs: int = DEFAULT_PROBE_PAIRS,
                      probe_scales=DEFAULT_PROBE_SCALES, chunk_size: int = 1 << 21) -> ContractionCheck:
    """Statistical check of the one-step coupling inequality at step t.

    For random pairs in the box it verifies, with 3-SE slack,
    E||step(x) - step(y)|| <= K_hat ||x - y|| + sigma_t * (exact pair mean),
    with K_hat probed unless supplied.  At t = 1 the step is deterministic
    decode and the check degenerates to the ratio-versus-probe comparison.
    """
    if rng is None:
        raise ValueError("check_contraction needs an explicit rng")
    t = int(t)
    m.schedule._check_t(t)
    if k_hat is None:
        k_hat = estimate_lipschitz(m, t, probe_pairs, probe_scales, rng)
    X, Y = _box_pairs(m, int(n_trials), rng)
    gap = np.linalg.norm(X - Y, axis=1)

    if t == 1:
        dist = np.linalg.norm(decode(m, X) - decode(m, Y), axis=1)
        ratios = dist[gap > 0.0] / gap[gap > 0.0]
        k_incl = max(k_hat, float(np.max(ratios)) if ratios.size else 0.0)
        margins = dist - k_incl * gap
        worst = float(np.max(margins))
        return ContractionCheck(
            "decode", 1, int(n_trials), worst <= 1e-12, worst,
            {"k_probe": float(k_hat), "k_with_pairs": k_incl},
        )

    sig = m.schedule.sigma(t)
    base = denoise_mean(m, X, t) - denoise_mean(m, Y, t)
    pair_exact = gaussian_pair_distance(m.dim)[0]
    rows = max(1, chunk_size // max(n_noise, 1))
    lhs = np.empty(int(n_trials))
    lhs_se = np.empty(int(n_trials))
    for i0 in range(0, int(n_trials), rows):
        i1 = min(i0 + rows, int(n_trials))
        e = rng.standard_normal((i1 - i0, n_noise, m.dim))
        e2 = rng.standard_normal((i1 - i0, n_noise, m.dim))
        d = np.linalg.norm(base[i0:i1, None, :] + sig * (e - e2), axis=2)
        lhs[i0:i1] = d.mean(axis=1)
        lhs_se[i0:i1] = d.std(axis=1, ddof=1) / math.sqrt(n_noise)
    rhs = k_hat * gap + sig * pair_exact
    margins = lhs - rhs - 3.0 * lhs_se
    worst = float(np.max(margins))
    idx = int(np.argmax(margins))
    return ContractionCheck(
        "single-step", t, int(n_trials), worst <= 0.0, worst,
        {"k_hat": float(k_hat), "sigma": sig, "pair_exact": pair_exact,
         "worst_lhs": float(lhs[idx]), "worst_rhs": float(rhs[idx])},
    )


def check_iterated_contraction(m: DiffusionModel, n_trials: int = 10000,
                               rng: np.random.Generator | None = None, n_chains: int = 8,
                               k_values=None, probe_pairs: int = DEFAULT_PROBE_PAIRS,
                               probe_scales=DEFAULT_PROBE_SCALES,
                               chunk_size: int = 1 << 16) -> ContractionCheck:
    """Statistical check of the whole-chain coupling inequality.

    Runs independent backward chains from random endpoint pairs and verifies,
    with 3-SE slack per pair, that the mean reconstruction distance stays
    below (prod K_hat) ||x_T - y_T|| + (sum of K-weighted sigmas) * pair mean.
    K_hat values are probed per step unless supplied.
    """
    if rng is None:
        raise ValueError("check_iterated_contraction needs an explicit rng")
    if m.schedule.T < 2:
        raise ValueError("iterated check needs T >= 2")
    n_chains = int(n_chains)
    if n_chains < 2:
        raise ValueError("need at least 2 chains per endpoint for a standard error")
    if k_values is None:
        k = np.array([
            estimate_lipschitz(m, t, probe_pairs, probe_scales, rng)
            for t in range(1, m.schedule.T + 1)
        ])
    else:
        k = np.asarray(k_values, dtype=np.float64)
        if k.shape != (m.schedule.T,):
            raise ValueError("k_values must have one entry per step")
    prod_k, sigma_weight = _k_products(k, m.schedule.sigmas)
    pair_exact = gaussian_pair_distance(m.dim)[0]

    X, Y = _box_pairs(m, int(n_trials), rng)
    gap = np.linalg.norm(X - Y, axis=1)
    rows = max(1, chunk_size // n_chains)
    lhs = np.empty(int(n_trials))
    lhs_se = np.empty(int(n_trials))
    for i0 in range(0, int(n_trials), rows):
        i1 = min(i0 + rows, int(n_trials))
        cnt = i1 - i0
        rx, ry = rng.spawn(2)
        xs = np.repeat(X[i0:i1], n_chains, axis=0)
        ys = np.repeat(Y[i0:i1], n_chains, axis=0)
        xhat = reconstruct(m, xs, rx).reshape(cnt, n_chains, m.dim)
        yhat = reconstruct(m, ys, ry).reshape(cnt, n_chains, m.dim)
        d = np.linalg.norm(xhat - yhat, axis=2)
        lhs[i0:i1] = d.mean(axis=1)
        lhs_se[i0:i1] = d.std(axis=1, ddof=1) / math.sqrt(n_chains)
    rhs = prod_k * gap + sigma_weight * pair_exact
    margins = lhs - rhs - 3.0 * lhs_se
    worst = float(np.max(margins))
    idx = int(np.argmax(margins))
    return ContractionCheck(
        "iterated", None, int(n_trials), worst <= 0.0, worst,
        {"prod_k": prod_k, "sigma_weight": sigma_weight, "pair_exact": pair_exact,
         "worst_lhs": float(lhs[idx]), "worst_rhs": float(rhs[idx]),
         "k_values": [float(v) for v in k]},
    )
