"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"ARRIVALNET/1"
    u32 header length, header = canonical JSON of the model config
    u32 parameter count
    per parameter: u16 name length, name (utf-8), u8 ndim, u32 dims..., float32 payload
    u32 CRC32 of every preceding byte

Parameters are stored as float32, so a model survives a roundtrip to 32-bit
precision and ``save(load(save(m)))`` is byte-identical to ``save(m)``.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .errors import ContractError, CorruptionError, FormatError
from .model import ArrivalNet, ModelConfig

MAGIC = b"ARRIVALNET/1"


def dumps(model):
    """Serialise ``model`` to checkpoint bytes."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    header = json.dumps(model.cfg.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    buf.write(struct.pack("<I", len(header)))
    buf.write(header)
    params = model.named_parameters()
    buf.write(struct.pack("<I", len(params)))
    for name, p in params.items():
        raw = name.encode()
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", p.data.ndim))
        buf.write(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
        buf.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    body = buf.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("checkpoint truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data):
    """Parse checkpoint bytes into ``(config, OrderedDict name -> float64 array)``."""
    if not data.startswith(MAGIC):
        raise FormatError("not an arrivalnet checkpoint (bad magic)")
    if len(data) < len(MAGIC) + 4:
        raise FormatError("checkpoint truncated")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptionError("checkpoint CRC32 mismatch")
    r = _Reader(body)
    r.take(len(MAGIC))
    (hlen,) = r.unpack("<I")
    try:
        cfg = ModelConfig.from_dict(json.loads(r.take(hlen).decode()))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"checkpoint header is not valid JSON: {exc}") from exc
    (count,) = r.unpack("<I")
    state = OrderedDict()
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        n = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(shape)
        state[name] = arr.astype(np.float64)
    if r.pos != len(body):
        raise FormatError("trailing bytes after parameter blocks")
    return cfg, state


def save_checkpoint(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(model))
    return path


def load_checkpoint(path):
    """Read a checkpoint file and rebuild the model it describes."""
    cfg, state = loads(Path(path).read_bytes())
    model = ArrivalNet(cfg)
    expected = model.named_parameters()
    for name, value in state.items():
        if name in expected and value.shape != expected[name].shape:
            raise ContractError(f"parameter {name}: stored shape {value.shape} "
                                f"does not match config shape {expected[name].shape}")
    model.load_state(state)
    return model
