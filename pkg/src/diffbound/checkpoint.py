"""Binary model checkpoints.

Layout (all integers little-endian uint32, all floats little-endian
float64):

    magic "DIFFBND\\0", version,
    D, time_embed_dim, activation name (length-prefixed utf-8), T,
    alphas[T], alpha_bars[T], sigmas[T], domain_box[D*2] row-major,
    layer count, then per layer: n_in, n_out, W[n_in*n_out] row-major, b[n_out],
    and a trailing SHA-256 checksum of everything before it.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .denoiser import DenoiserNet, DiffusionModel
from .mlp import Mlp
from .schedule import NoiseSchedule

__all__ = ["CheckpointError", "save_model", "load_model", "MAGIC", "VERSION"]

MAGIC = b"DIFFBND\x00"
VERSION = 1


class CheckpointError(Exception):
    """Checkpoint file is missing, malformed, or fails its checksum."""


def _u32(v: int) -> bytes:
    return struct.pack("<I", v)


def _f64s(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_model(m: DiffusionModel, path) -> str:
    """Write the model; returns the hex checksum that was embedded."""
    s = m.schedule
    parts = [
        MAGIC,
        _u32(VERSION),
        _u32(m.dim),
        _u32(m.net.time_embed_dim),
    ]
    act = m.net.mlp.activation.encode("utf-8")
    parts.append(_u32(len(act)))
    parts.append(act)
    parts.append(_u32(s.T))
    parts.append(_f64s(s.alphas))
    parts.append(_f64s(s.alpha_bars))
    parts.append(_f64s(s.sigmas))
    parts.append(_f64s(m.domain_box))
    parts.append(_u32(len(m.net.mlp.weights)))
    for w, b in zip(m.net.mlp.weights, m.net.mlp.biases):
        parts.append(_u32(w.shape[0]))
        parts.append(_u32(w.shape[1]))
        parts.append(_f64s(w))
        parts.append(_f64s(b))
    body = b"".join(parts)
    digest = hashlib.sha256(body).digest()
    Path(path).write_bytes(body + digest)
    return digest.hex()


class _Reader:
    def __init__(self, buf: bytes, path: str):
        self.buf = buf
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64s(self, count: int) -> np.ndarray:
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def load_model(path) -> DiffusionModel:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"{path}: cannot read checkpoint: {e}") from e
    if len(raw) < len(MAGIC) + 4 + 32:
        raise CheckpointError(f"{path}: file too short to be a checkpoint")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch (corrupt checkpoint)")
    r = _Reader(body, str(path))
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path}: bad magic (not a diffbound checkpoint)")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    dim = r.u32()
    time_embed_dim = r.u32()
    act = r.take(r.u32()).decode("utf-8")
    T = r.u32()
    alphas = r.f64s(T)
    alpha_bars = r.f64s(T)
    sigmas = r.f64s(T)
    box = r.f64s(dim * 2).reshape(dim, 2)
    n_layers = r.u32()
    weights, biases = [], []
    for _ in range(n_layers):
        n_in = r.u32()
        n_out = r.u32()
        weights.append(r.f64s(n_in * n_out).reshape(n_in, n_out))
        biases.append(r.f64s(n_out))
    if r.off != len(body):
        raise CheckpointError(f"{path}: {len(body) - r.off} trailing bytes after payload")
    try:
        schedule = NoiseSchedule(alphas, alpha_bars, sigmas)
        net = DenoiserNet(Mlp(weights, biases, act), dim, time_embed_dim)
        return DiffusionModel(schedule, net, box)
    except ValueError as e:
        raise CheckpointError(f"{path}: invalid model contents: {e}") from e
