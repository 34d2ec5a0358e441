"""Empirical Wasserstein-1 estimators.

These are the independent checkers for the certified bound: an exact solver
on equal-size sets (min-cost assignment), a sliced lower bound from random
1-D projections, and the trivial product-coupling upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .data import SampleSet

__all__ = [
    "W1Estimate",
    "EXACT_SIZE_LIMIT",
    "exact_w1",
    "w1_1d",
    "sliced_w1_lower",
    "trivial_coupling_upper",
]

EXACT_SIZE_LIMIT = 512


@dataclass(frozen=True)
class W1Estimate:
    value: float
    kind: str  # "exact" | "lower_bound" | "upper_bound"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("exact", "lower_bound", "upper_bound"):
            raise ValueError(f"unknown estimate kind {self.kind!r}")
        if not (np.isfinite(self.value) and self.value >= 0.0):
            raise ValueError("estimate value must be finite and nonnegative")


def _points(x) -> np.ndarray:
    if isinstance(x, SampleSet):
        return x.points
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an (n, D) point array or SampleSet")
    return x


def exact_w1(A, B, size_limit: int = EXACT_SIZE_LIMIT) -> W1Estimate:
    """W1 between two equal-size empirical measures via min-cost assignment."""
    a, b = _points(A), _points(B)
    if a.shape[0] != b.shape[0]:
        raise ValueError("exact_w1 needs equal-size sets")
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch")
    if a.shape[0] > size_limit:
        raise ValueError(f"set size {a.shape[0]} exceeds the exact-size limit {size_limit}")
    cost = cdist(a, b)
    rows, cols = linear_sum_assignment(cost)
    value = float(cost[rows, cols].sum() / a.shape[0])
    return W1Estimate(value, "exact", {"n": a.shape[0]})


def w1_1d(u: np.ndarray, v: np.ndarray) -> float:
    """Exact 1-D W1 between two empirical measures (quantile coupling)."""
    u = np.sort(np.asarray(u, dtype=np.float64))
    v = np.sort(np.asarray(v, dtype=np.float64))
    if u.size == v.size:
        return float(np.mean(np.abs(u - v)))
    # unequal sizes: integrate |F_u^{-1} - F_v^{-1}| over the merged quantile grid
    qs = np.concatenate([np.arange(1, u.size) / u.size, np.arange(1, v.size) / v.size])
    qs = np.unique(np.concatenate([[0.0], qs, [1.0]]))
    widths = np.diff(qs)
    mids = (qs[:-1] + qs[1:]) / 2.0
    ui = u[np.minimum((mids * u.size).astype(int), u.size - 1)]
    vi = v[np.minimum((mids * v.size).astype(int), v.size - 1)]
    return float(np.sum(widths * np.abs(ui - vi)))


def sliced_w1_lower(A, B, n_projections: int = 128, rng: np.random.Generator | None = None) -> W1Estimate:
    """Max over random unit directions of the projected 1-D W1.

    Projection is a 1-Lipschitz map, so each projected distance is a lower
    bound on the true W1; the max over directions stays one.
    """
    if rng is None:
        raise ValueError("sliced_w1_lower needs an explicit rng")
    n_projections = int(n_projections)
    if n_projections < 1:
        raise ValueError("n_projections must be >= 1")
    a, b = _points(A), _points(B)
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch")
    dim = a.shape[1]
    best = 0.0
    for _ in range(n_projections):
        u = rng.standard_normal(dim)
        norm = np.linalg.norm(u)
        while norm == 0.0:
            u = rng.standard_normal(dim)
            norm = np.linalg.norm(u)
        u /= norm
        best = max(best, w1_1d(a @ u, b @ u))
    return W1Estimate(best, "lower_bound", {"n_a": a.shape[0], "n_b": b.shape[0], "n_projections": n_projections})


def trivial_coupling_upper(A, B) -> W1Estimate:
    """Mean pairwise distance: the product-coupling upper bound on W1."""
    a, b = _points(A), _points(B)
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch")
    value = float(cdist(a, b).mean())
    return W1Estimate(value, "upper_bound", {"n_a": a.shape[0], "n_b": b.shape[0]})
