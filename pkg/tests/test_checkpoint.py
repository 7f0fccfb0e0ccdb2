import json
import struct
import zlib

import numpy as np
import pytest

from arrivalnet.checkpoint import MAGIC, dumps, load_checkpoint, loads, save_checkpoint
from arrivalnet.errors import ContractError, CorruptionError, FormatError
from arrivalnet.model import ArrivalNet, ModelConfig
from arrivalnet.training import train


def trained_like(backbone="inception"):
    model = ArrivalNet(ModelConfig(backbone=backbone, n_future=5), seed=3)
    rng = np.random.default_rng(0)
    model.head_weight.data = rng.normal(0, 0.3, size=model.head_weight.shape)
    model.head_bias.data = np.array([0.1])
    return model


@pytest.mark.parametrize("backbone", ["inception", "swin"])
def test_save_load_save_byte_identical(tmp_path, backbone):
    m = trained_like(backbone)
    p1 = save_checkpoint(m, tmp_path / "a.ckpt")
    p2 = save_checkpoint(load_checkpoint(p1), tmp_path / "b.ckpt")
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes().startswith(MAGIC)


def forward_rel_err(a, b):
    """Relative error of delay forecasts, with a 1 s floor so near-zero delays don't dominate."""
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1.0)))


@pytest.mark.parametrize("backbone", ["inception", "swin"])
def test_forward_equivalent_after_roundtrip(tmp_path, small_samples, backbone):
    m = train(ModelConfig(epochs=2, backbone=backbone), small_samples[:400], seed=0).model
    loaded = load_checkpoint(save_checkpoint(m, tmp_path / "m.ckpt"))
    assert loaded.cfg == m.cfg
    assert forward_rel_err(m.predict_delays(small_samples), loaded.predict_delays(small_samples)) < 1e-6


def test_parameters_at_float32_precision(tmp_path):
    m = trained_like()
    loaded = load_checkpoint(save_checkpoint(m, tmp_path / "m.ckpt"))
    for (name, p), q in zip(m.named_parameters().items(), loaded.parameters()):
        np.testing.assert_array_equal(q.data, p.data.astype(np.float32).astype(np.float64), err_msg=name)


def test_flipped_payload_bit_detected():
    data = bytearray(dumps(trained_like()))
    data[len(data) // 2] ^= 0x10
    with pytest.raises(CorruptionError):
        loads(bytes(data))


def test_bad_magic():
    data = dumps(trained_like())
    with pytest.raises(FormatError):
        loads(b"NOTANET/1" + data[len(MAGIC):])


def test_shape_mismatch_is_contract_error(tmp_path):
    data = dumps(trained_like())
    hlen = struct.unpack("<I", data[len(MAGIC):len(MAGIC) + 4])[0]
    header = json.loads(data[len(MAGIC) + 4:len(MAGIC) + 4 + hlen])
    header["d_model"] = 8
    new = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = MAGIC + struct.pack("<I", len(new)) + new + data[len(MAGIC) + 4 + hlen:-4]
    path = tmp_path / "bad.ckpt"
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    with pytest.raises(ContractError):
        load_checkpoint(path)


def test_truncated():
    with pytest.raises(FormatError):
        loads(MAGIC + b"\x00")
