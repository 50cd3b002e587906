"""Versioned binary checkpoint.

Layout (all little-endian)::

    magic      4 bytes  b"SQLC"
    version    u32      1
    D, H       u32, u32
    flags      u32      bit0 peepholes, bit1 output peephole on c_t
    params     f64[]    every array of net.PARAM_ORDER, C order
    has_optim  u32      0 or 1
    [step u64, lr f64, beta1 f64, beta2 f64, eps f64,
     m f64[] in PARAM_ORDER, v f64[] in PARAM_ORDER]   when has_optim == 1
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointFormatError
from .net import CellOptions, PARAM_ORDER, param_shapes
from .optim import Adam

MAGIC = b"SQLC"
VERSION = 1
_F8 = np.dtype("<f8")


def _pack_arrays(arrays: dict) -> bytes:
    return b"".join(np.ascontiguousarray(arrays[k], dtype=_F8).tobytes() for k in PARAM_ORDER)


def to_bytes(params: dict, options: CellOptions = CellOptions(), optimizer: Adam | None = None) -> bytes:
    H, D = params["W_xi"].shape
    flags = int(options.peepholes) | (int(options.output_peephole_current_cell) << 1)
    out = [MAGIC, struct.pack("<IIII", VERSION, D, H, flags), _pack_arrays(params)]
    if optimizer is None or not optimizer.m:
        out.append(struct.pack("<I", 0))
    else:
        out.append(struct.pack("<IQdddd", 1, optimizer.step_count, optimizer.lr,
                               optimizer.beta1, optimizer.beta2, optimizer.eps))
        out.append(_pack_arrays(optimizer.m))
        out.append(_pack_arrays(optimizer.v))
    return b"".join(out)


def _read_arrays(buf: bytes, offset: int, shapes: dict):
    arrays = {}
    for k in PARAM_ORDER:
        n = int(np.prod(shapes[k]))
        end = offset + 8 * n
        if end > len(buf):
            raise CheckpointFormatError("truncated checkpoint")
        arrays[k] = np.frombuffer(buf, dtype=_F8, count=n, offset=offset).reshape(shapes[k]).astype(np.float64)
        offset = end
    return arrays, offset


def from_bytes(buf: bytes):
    """Return ``(params, options, optimizer_or_None)``."""
    if buf[:4] != MAGIC:
        raise CheckpointFormatError("bad magic")
    version, D, H, flags = struct.unpack_from("<IIII", buf, 4)
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    options = CellOptions(peepholes=bool(flags & 1), output_peephole_current_cell=bool(flags & 2))
    shapes = param_shapes(D, H)
    params, off = _read_arrays(buf, 20, shapes)
    (has_optim,) = struct.unpack_from("<I", buf, off)
    off += 4
    optimizer = None
    if has_optim:
        step, lr, b1, b2, eps = struct.unpack_from("<Qdddd", buf, off)
        off += struct.calcsize("<Qdddd")
        optimizer = Adam(lr, b1, b2, eps)
        optimizer.step_count = step
        optimizer.m, off = _read_arrays(buf, off, shapes)
        optimizer.v, off = _read_arrays(buf, off, shapes)
    if off != len(buf):
        raise CheckpointFormatError(f"{len(buf) - off} trailing bytes")
    return params, options, optimizer


def save(path, params, options: CellOptions = CellOptions(), optimizer: Adam | None = None) -> None:
    Path(path).write_bytes(to_bytes(params, options, optimizer))


def load(path):
    return from_bytes(Path(path).read_bytes())
