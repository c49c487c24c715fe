"""CAPD dataset container.

Layout (little-endian)::

    magic   4s   b"CAPD"
    version u16  1
    count   u32  number of samples
    joints  u16
    levels  u16  L (0 = no pyramids)
    L x (H u16, W u16, C u16, factor u16)
    frame_interval f64
    count x record:
        seq_id i64, frame i64, seed_record 2 x i64
        gt3d J*3 f64, gt2d J*2 f64, det2d J*2 f64, depth J f64
        L x map H*W*C f32 (row-major H, W, C)
"""
import struct

import numpy as np

from .dataset import PoseDataset

MAGIC = b"CAPD"
VERSION = 1
_HEAD = struct.Struct("<4sHIHH")
_LEVEL = struct.Struct("<HHHH")
_F64 = struct.Struct("<d")


class FormatError(ValueError):
    """Malformed container; ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def write_dataset(dataset, path):
    ds = dataset.materialize()
    n, j = len(ds), ds.n_joints
    maps = ds.maps or []
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, n, j, len(maps)))
        for m, factor in zip(maps, ds.downsample_factors):
            fh.write(_LEVEL.pack(m.shape[1], m.shape[2], m.shape[3], factor))
        fh.write(_F64.pack(ds.frame_interval))
        ints = np.stack([ds.seq_id, ds.frame, ds.seed_records[:, 0], ds.seed_records[:, 1]],
                        axis=1).astype("<i8") if n else np.zeros((0, 4), "<i8")
        for i in range(n):
            fh.write(ints[i].tobytes())
            for arr in (ds.gt3d[i], ds.gt2d[i], ds.det2d[i], ds.depth[i]):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
            for m in maps:
                fh.write(np.ascontiguousarray(m[i], dtype="<f4").tobytes())


def read_dataset(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEAD.size:
        raise FormatError("truncated header", len(buf))
    magic, version, n, j, n_levels = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if j < 1:
        raise FormatError("joint count must be positive", 10)
    off = _HEAD.size
    shapes, factors = [], []
    for _ in range(n_levels):
        if off + _LEVEL.size > len(buf):
            raise FormatError("truncated level table", off)
        h, w, c, factor = _LEVEL.unpack_from(buf, off)
        if min(h, w, c, factor) < 1:
            raise FormatError("level extents must be positive", off)
        shapes.append((h, w, c))
        factors.append(factor)
        off += _LEVEL.size
    if off + _F64.size > len(buf):
        raise FormatError("truncated header", off)
    (frame_interval,) = _F64.unpack_from(buf, off)
    off += _F64.size

    pose_bytes = 8 * (4 + j * 3 + j * 2 + j * 2 + j)
    map_bytes = [4 * h * w * c for h, w, c in shapes]
    record = pose_bytes + sum(map_bytes)
    need = off + n * record
    if len(buf) < need:
        full = (len(buf) - off) // record if record else 0
        raise FormatError(f"truncated: {n} records declared, {full} complete",
                          off + full * record)
    if len(buf) > need:
        raise FormatError("trailing bytes after last record", need)

    ints = np.empty((n, 4), dtype=np.int64)
    gt3d, gt2d = np.empty((n, j, 3)), np.empty((n, j, 2))
    det2d, depth = np.empty((n, j, 2)), np.empty((n, j))
    maps = [np.empty((n,) + s, dtype=np.float32) for s in shapes]
    for i in range(n):
        pos = off + i * record
        ints[i] = np.frombuffer(buf, "<i8", 4, pos)
        pos += 32
        for arr, count in ((gt3d, j * 3), (gt2d, j * 2), (det2d, j * 2), (depth, j)):
            arr[i] = np.frombuffer(buf, "<f8", count, pos).reshape(arr.shape[1:])
            pos += 8 * count
        for m, nbytes in zip(maps, map_bytes):
            m[i] = np.frombuffer(buf, "<f4", nbytes // 4, pos).reshape(m.shape[1:])
            pos += nbytes
    values = np.concatenate([gt3d.ravel(), gt2d.ravel(), det2d.ravel(), depth.ravel()])
    if not np.all(np.isfinite(values)):
        raise FormatError("non-finite pose values", off)
    return PoseDataset(gt3d, gt2d, det2d, depth, ints[:, 0], ints[:, 1], ints[:, 2:],
                       maps=maps if n_levels else None, downsample_factors=tuple(factors),
                       frame_interval=frame_interval)
