"""Checkpoint format tests: bitwise fidelity and corruption detection."""

import numpy as np
import pytest

from conftest import make_null_model, quick_constant_model
from diffbound.checkpoint import MAGIC, CheckpointError, load_model, save_model
from diffbound.schedule import linear_schedule


class TestRoundtrip:
    def test_bitwise_exact(self, tmp_path):
        m = quick_constant_model(T=5, hidden=(7, 3), seed=2)
        path = tmp_path / "model.ckpt"
        save_model(m, path)
        back = load_model(path)
        assert np.array_equal(back.schedule.alphas, m.schedule.alphas)
        assert np.array_equal(back.schedule.alpha_bars, m.schedule.alpha_bars)
        assert np.array_equal(back.schedule.sigmas, m.schedule.sigmas)
        assert np.array_equal(back.domain_box, m.domain_box)
        assert back.net.time_embed_dim == m.net.time_embed_dim
        assert back.net.mlp.activation == m.net.mlp.activation
        for a, b in zip(back.net.mlp.weights, m.net.mlp.weights):
            assert np.array_equal(a, b)
        for a, b in zip(back.net.mlp.biases, m.net.mlp.biases):
            assert np.array_equal(a, b)

    def test_predictions_survive_roundtrip(self, tmp_path, rng):
        m = quick_constant_model(hidden=(16,), seed=4)
        path = tmp_path / "model.ckpt"
        save_model(m, path)
        back = load_model(path)
        x = rng.normal(size=(20, 2))
        assert np.array_equal(back.net.predict_noise(x, 3), m.net.predict_noise(x, 3))

    def test_checksum_is_returned_and_stable(self, tmp_path):
        m = make_null_model(linear_schedule(4))
        p1 = tmp_path / "a.ckpt"
        p2 = tmp_path / "b.ckpt"
        d1 = save_model(m, p1)
        d2 = save_model(m, p2)
        assert d1 == d2
        assert len(d1) == 64
        assert p1.read_bytes() == p2.read_bytes()

    def test_softplus_activation_preserved(self, tmp_path):
        from diffbound.denoiser import init_model

        m = init_model(linear_schedule(3), np.array([[-1.0, 1.0]]), hidden=(5,),
                       time_embed_dim=4, activation="softplus",
                       rng=np.random.default_rng(0))
        path = tmp_path / "m.ckpt"
        save_model(m, path)
        assert load_model(path).net.mlp.activation == "softplus"


class TestCorruption:
    def make_file(self, tmp_path):
        m = quick_constant_model(T=3, hidden=(4,), seed=1)
        path = tmp_path / "model.ckpt"
        save_model(m, path)
        return path

    def test_flipped_payload_byte(self, tmp_path):
        path = self.make_file(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="checksum"):
            load_model(path)

    def test_flipped_checksum_byte(self, tmp_path):
        path = self.make_file(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[-1] ^= 0x01
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="checksum"):
            load_model(path)

    def test_truncation(self, tmp_path):
        path = self.make_file(tmp_path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(CheckpointError):
            load_model(path)

    def test_too_short_file(self, tmp_path):
        path = tmp_path / "stub.ckpt"
        path.write_bytes(b"tiny")
        with pytest.raises(CheckpointError, match="short"):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="cannot read"):
            load_model(tmp_path / "nope.ckpt")

    def test_bad_magic(self, tmp_path):
        import hashlib

        path = self.make_file(tmp_path)
        raw = bytearray(path.read_bytes())[:-32]
        raw[: len(MAGIC)] = b"NOTDIFF\x00"
        body = bytes(raw)
        path.write_bytes(body + hashlib.sha256(body).digest())
        with pytest.raises(CheckpointError, match="magic"):
            load_model(path)

    def test_unsupported_version(self, tmp_path):
        import hashlib
        import struct

        path = self.make_file(tmp_path)
        raw = bytearray(path.read_bytes())[:-32]
        raw[len(MAGIC) : len(MAGIC) + 4] = struct.pack("<I", 99)
        body = bytes(raw)
        path.write_bytes(body + hashlib.sha256(body).digest())
        with pytest.raises(CheckpointError, match="version"):
            load_model(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        import hashlib

        path = self.make_file(tmp_path)
        body = path.read_bytes()[:-32] + b"\x00" * 8
        path.write_bytes(body + hashlib.sha256(body).digest())
        with pytest.raises(CheckpointError, match="trailing"):
            load_model(path)
