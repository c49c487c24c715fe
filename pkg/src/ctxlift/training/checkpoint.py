"""CAPF checkpoint container.

Layout (little-endian)::

    magic    4s   b"CAPF"
    version  u16  1
    cfg_len  u32  byte length of the config block
    config   UTF-8 JSON object of the ModelConfig fields (sorted keys)
    count    u32  number of tensors
    count x tensor:
        name_len u16, name (UTF-8)
        ndim u8, ndim x u32 extents
        data     f64 x prod(extents), row-major
"""
import json
import struct

import numpy as np

from ..data.io import FormatError
from ..model import ModelConfig, ParameterSet
from ..model.config import ConfigError

MAGIC = b"CAPF"
VERSION = 1
_HEAD = struct.Struct("<4sHI")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")
_U8 = struct.Struct("<B")


def write_checkpoint(path, config, params):
    """Serialize ``config`` and every tensor of ``params`` to ``path``."""
    cfg = json.dumps(config.to_dict(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, len(cfg)))
        fh.write(cfg)
        fh.write(_U32.pack(len(params)))
        for name, tensor in params.items():
            raw = name.encode("utf-8")
            fh.write(_U16.pack(len(raw)))
            fh.write(raw)
            data = np.ascontiguousarray(tensor.data, dtype="<f8")
            fh.write(_U8.pack(data.ndim))
            for n in data.shape:
                fh.write(_U32.pack(n))
            fh.write(data.tobytes())


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.off = 0

    def take(self, n, what):
        if self.off + n > len(self.buf):
            raise FormatError(f"truncated {what}", self.off)
        chunk = self.buf[self.off:self.off + n]
        self.off += n
        return chunk

    def unpack(self, st, what):
        return st.unpack(self.take(st.size, what))


def read_checkpoint(path):
    """Return ``(ModelConfig, ParameterSet)``; malformed input raises FormatError."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    magic, version, cfg_len = r.unpack(_HEAD, "header")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    start = r.off
    try:
        config = ModelConfig.from_dict(json.loads(r.take(cfg_len, "config").decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, ConfigError, TypeError) as exc:
        raise FormatError(f"invalid config block: {exc}", start) from exc
    (count,) = r.unpack(_U32, "tensor count")
    params = ParameterSet()
    for _ in range(count):
        at = r.off
        (name_len,) = r.unpack(_U16, "tensor name")
        try:
            name = r.take(name_len, "tensor name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("tensor name is not UTF-8", at) from exc
        (ndim,) = r.unpack(_U8, "tensor rank")
        shape = tuple(r.unpack(_U32, "tensor shape")[0] for _ in range(ndim))
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(r.take(8 * size, f"tensor {name}"), dtype="<f8").reshape(shape)
        if not np.all(np.isfinite(data)):
            raise FormatError(f"non-finite values in {name}", at)
        if size == 0 or name in params:
            raise FormatError(f"invalid or duplicate tensor {name!r}", at)
        params.add(name, data.astype(np.float64))
    if r.off != len(r.buf):
        raise FormatError("trailing bytes after last tensor", r.off)
    return config, params
