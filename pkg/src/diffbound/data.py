"""Synthetic data distributions on bounded 2-D instance spaces.

The main generator is the uniform square of configurable side.  A circle
generator is included as a singular (no-density) stress case.  Sample sets
carry their provenance and the bounding box of the space they live in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "SampleSet",
    "uniform_square",
    "uniform_circle",
    "domain_diameter",
    "save_sample_set",
    "load_sample_set",
]


@dataclass(frozen=True)
class SampleSet:
    """Points drawn iid from one generator, with provenance metadata."""

    points: np.ndarray
    source: str = "unknown"
    params: dict = field(default_factory=dict)
    seed: int | None = None
    domain_box: np.ndarray | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a nonempty (n, D) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.domain_box is not None:
            box = np.ascontiguousarray(np.asarray(self.domain_box, dtype=np.float64))
            if box.shape != (pts.shape[1], 2) or not np.all(np.isfinite(box)):
                raise ValueError("domain_box must be a finite (D, 2) array")
            if np.any(pts < box[:, 0]) or np.any(pts > box[:, 1]):
                raise ValueError("points must lie inside the declared domain_box")
            box.flags.writeable = False
            object.__setattr__(self, "domain_box", box)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def uniform_square(n: int, side: float = 2.0, rng: np.random.Generator | None = None) -> SampleSet:
    """n iid points uniform on the centered square of the given side."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not side > 0.0:
        raise ValueError("side must be positive")
    if rng is None:
        raise ValueError("uniform_square needs an explicit rng")
    half = side / 2.0
    pts = (rng.random((n, 2)) - 0.5) * side
    box = np.array([[-half, half], [-half, half]])
    return SampleSet(pts, "uniform_square", {"side": side}, None, box)


def uniform_circle(n: int, radius: float = 1.0, rng: np.random.Generator | None = None) -> SampleSet:
    """n iid points uniform on the circle boundary of the given radius.

    A singular distribution (no density in the plane); useful for stressing
    the bound when the data live on a lower-dimensional set.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not radius > 0.0:
        raise ValueError("radius must be positive")
    if rng is None:
        raise ValueError("uniform_circle needs an explicit rng")
    ang = rng.random(n) * 2.0 * math.pi
    pts = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    box = np.array([[-radius, radius], [-radius, radius]])
    return SampleSet(pts, "uniform_circle", {"radius": radius}, None, box)


def domain_diameter(box) -> float:
    """Euclidean length of the box diagonal (the instance-space diameter)."""
    box = np.asarray(box, dtype=np.float64)
    if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] < 1:
        raise ValueError("box must have shape (D, 2)")
    if not np.all(np.isfinite(box)):
        raise ValueError("box must be bounded (finite entries)")
    if np.any(box[:, 0] > box[:, 1]):
        raise ValueError("box lower bounds must not exceed upper bounds")
    return float(np.linalg.norm(box[:, 1] - box[:, 0]))


def _meta_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".meta.json")


def save_sample_set(ss: SampleSet, csv_path) -> None:
    """Write points as CSV (one point per row) plus a JSON metadata sidecar."""
    csv_path = Path(csv_path)
    header = ",".join(f"x{d}" for d in range(ss.dim))
    lines = [header]
    for row in ss.points:
        lines.append(",".join(repr(float(v)) for v in row))
    csv_path.write_text("\n".join(lines) + "\n")
    meta = {
        "source": ss.source,
        "params": ss.params,
        "seed": ss.seed,
        "n": ss.n,
        "dim": ss.dim,
        "domain_box": None if ss.domain_box is None else ss.domain_box.tolist(),
    }
    _meta_path(csv_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_sample_set(csv_path) -> SampleSet:
    csv_path = Path(csv_path)
    lines = csv_path.read_text().strip().split("\n")
    if len(lines) < 2:
        raise ValueError(f"{csv_path}: no data rows")
    pts = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    meta_path = _meta_path(csv_path)
    source, params, seed, box = "unknown", {}, None, None
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        source = meta.get("source", source)
        params = meta.get("params", params)
        seed = meta.get("seed")
        if meta.get("domain_box") is not None:
            box = np.asarray(meta["domain_box"], dtype=np.float64)
    return SampleSet(pts, source, params, seed, box)
