"""Binary checkpoint container: config text + named arrays (+ optimizer).

Layout (all integers little-endian):

    magic   b"SEQRECKPT1\\n"
    u32     config byte length, then UTF-8 config text (key = value lines)
    u32     parameter array count, then that many array blocks
    u8      optimizer flag; if 1: u64 step count, u32 count, array blocks

One array block:

    u16 name length + UTF-8 name
    u8  dtype code (4 = float32, 8 = float64)
    u8  ndim, then ndim * u32 dims
    raw little-endian payload

Arrays round-trip bit-exactly in their own dtype, so a float64 training
run resumes with no precision loss.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"SEQRECKPT1\n"
_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


def _write_array(fh, name: str, arr: np.ndarray) -> None:
    if arr.dtype == np.float32:
        code, dt = 4, _DTYPES[4]
    elif arr.dtype == np.float64:
        code, dt = 8, _DTYPES[8]
    else:
        raise CheckpointError(f"array {name!r} has unsupported dtype {arr.dtype}")
    name_b = name.encode("utf-8")
    fh.write(struct.pack("<H", len(name_b)))
    fh.write(name_b)
    fh.write(struct.pack("<BB", code, arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint: wanted {n} bytes, got {len(data)}")
    return data


def _read_array(fh) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
    name = _read_exact(fh, name_len).decode("utf-8")
    code, ndim = struct.unpack("<BB", _read_exact(fh, 2))
    if code not in _DTYPES:
        raise CheckpointError(f"array {name!r}: unknown dtype code {code}")
    shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
    count = int(np.prod(shape)) if ndim else 1
    payload = _read_exact(fh, count * code)
    arr = np.frombuffer(payload, dtype=_DTYPES[code]).reshape(shape).copy()
    return name, arr


def save_checkpoint(
    path,
    config_text: str,
    params: dict[str, np.ndarray],
    opt_step: int | None = None,
    opt_arrays: dict[str, np.ndarray] | None = None,
) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        config_b = config_text.encode("utf-8")
        fh.write(struct.pack("<I", len(config_b)))
        fh.write(config_b)
        fh.write(struct.pack("<I", len(params)))
        for name, arr in params.items():
            _write_array(fh, name, arr)
        if opt_step is None:
            fh.write(struct.pack("<B", 0))
        else:
            fh.write(struct.pack("<B", 1))
            fh.write(struct.pack("<Q", opt_step))
            fh.write(struct.pack("<I", len(opt_arrays or {})))
            for name, arr in (opt_arrays or {}).items():
                _write_array(fh, name, arr)


def load_checkpoint(path):
    """Returns (config_text, params, opt_step | None, opt_arrays | None)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(
                f"bad magic/version header {magic!r}; expected {MAGIC!r}"
            )
        (config_len,) = struct.unpack("<I", _read_exact(fh, 4))
        config_text = _read_exact(fh, config_len).decode("utf-8")
        (n_params,) = struct.unpack("<I", _read_exact(fh, 4))
        params = dict(_read_array(fh) for _ in range(n_params))
        (has_opt,) = struct.unpack("<B", _read_exact(fh, 1))
        opt_step = None
        opt_arrays = None
        if has_opt:
            (opt_step,) = struct.unpack("<Q", _read_exact(fh, 8))
            (n_opt,) = struct.unpack("<I", _read_exact(fh, 4))
            opt_arrays = dict(_read_array(fh) for _ in range(n_opt))
    return config_text, params, opt_step, opt_arrays
