"""Versioned binary checkpoints: policy parameters plus optimizer moments.

Layout (little-endian):
  magic "ACKP" | u32 version | u16 hash_len + config-hash utf-8
  | u32 n_blobs | blobs | u8 has_optimizer
  | [u64 t | u64 skipped | 2*n_blobs moment blobs (m then v, param order)]
Each blob: u16 name_len + name | u16 dtype_len + numpy dtype str
  | u8 ndim | u32*ndim shape | raw array bytes.
Round-trips are bit-exact: arrays are written with tobytes() and restored
with frombuffer() at the recorded dtype.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..numerics import Adam
from .policy import Policy

MAGIC = b"ACKP"
VERSION = 1


def _write_blob(out: list[bytes], name: str, arr: np.ndarray) -> None:
    nb = name.encode()
    dt = arr.dtype.str.encode()
    out.append(struct.pack("<H", len(nb)))
    out.append(nb)
    out.append(struct.pack("<H", len(dt)))
    out.append(dt)
    out.append(struct.pack("<B", arr.ndim))
    out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    out.append(np.ascontiguousarray(arr).tobytes())


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, fmt: str):
        vals = struct.unpack_from(fmt, self.buf, self.off)
        self.off += struct.calcsize(fmt)
        return vals if len(vals) > 1 else vals[0]

    def raw(self, n: int) -> bytes:
        b = self.buf[self.off:self.off + n]
        self.off += n
        return b

    def blob(self) -> tuple[str, np.ndarray]:
        name = self.raw(self.take("<H")).decode()
        dtype = np.dtype(self.raw(self.take("<H")).decode())
        ndim = self.take("<B")
        shape = tuple(struct.unpack_from(f"<{ndim}I", self.buf, self.off))
        self.off += 4 * ndim
        n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(self.raw(n * dtype.itemsize), dtype=dtype).reshape(shape)
        return name, arr.copy()


def save_checkpoint(path, policy: Policy, config_hash: str = "",
                    optimizer: Adam | None = None) -> None:
    names = sorted(policy.params)
    out: list[bytes] = [MAGIC, struct.pack("<I", VERSION)]
    hb = config_hash.encode()
    out.append(struct.pack("<H", len(hb)))
    out.append(hb)
    out.append(struct.pack("<I", len(names)))
    for name in names:
        _write_blob(out, name, policy.params[name].data)
    if optimizer is None:
        out.append(struct.pack("<B", 0))
    else:
        state = optimizer.state_dict()
        out.append(struct.pack("<B", 1))
        out.append(struct.pack("<QQ", state["t"], state["skipped_updates"]))
        for name in names:
            _write_blob(out, name, np.asarray(state["m"][name]))
        for name in names:
            _write_blob(out, name, np.asarray(state["v"][name]))
    Path(path).write_bytes(b"".join(out))


def load_checkpoint(path, policy: Policy,
                    optimizer: Adam | None = None) -> str:
    """Restore parameters (and optimizer moments when present) in place.

    Returns the stored config hash so callers can reject mismatched runs.
    """
    r = _Reader(Path(path).read_bytes())
    if r.raw(4) != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    version = r.take("<I")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    config_hash = r.raw(r.take("<H")).decode()
    n = r.take("<I")
    names = sorted(policy.params)
    if n != len(names):
        raise ValueError(f"{path}: {n} parameter blobs, model has {len(names)}")
    for _ in range(n):
        name, arr = r.blob()
        if name not in policy.params:
            raise ValueError(f"{path}: unknown parameter {name!r}")
        tgt = policy.params[name]
        if arr.shape != tgt.data.shape:
            raise ValueError(
                f"{path}: shape mismatch for {name!r}: {arr.shape} vs {tgt.data.shape}")
        tgt.data = arr
    has_opt = r.take("<B")
    if has_opt and optimizer is not None:
        t, skipped = r.take("<QQ")
        m = dict(r.blob() for _ in range(n))
        v = dict(r.blob() for _ in range(n))
        optimizer.load_state_dict(
            {"t": t, "skipped_updates": skipped, "m": m, "v": v})
    return config_hash
