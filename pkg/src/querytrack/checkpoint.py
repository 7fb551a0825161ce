"""Binary checkpoint format.

Layout (all integers little-endian u32):
    magic "AQAT" | format version | parameter count
    per parameter: name length | UTF-8 name | rank | dims... | float32 data

Data is written as little-endian float32, so a save/load round trip of a
float32 model is bit-exact.
"""
import struct

import numpy as np

from .errors import ContractError

MAGIC = b"AQAT"
VERSION = 1


def save(path, named_arrays):
    """Write (name, array) pairs; arrays are cast to little-endian float32."""
    items = list(named_arrays)
    names = [n for n, _ in items]
    if len(set(names)) != len(names):
        raise ContractError("duplicate parameter names in checkpoint")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(items)))
        for name, arr in items:
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            arr = np.asarray(arr)
            f.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load(path):
    """Read a checkpoint into an ordered {name: float32 array} dict."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ContractError(f"{path}: bad checkpoint magic {blob[:4]!r}")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise ContractError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off : off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(dims)
        off += 4 * n
        out[name] = arr.copy()
    return out


def save_model(path, model):
    model.assign_names()
    save(path, ((name, p.data) for name, p in model.named_parameters()))


def load_model(path, model):
    """Load a checkpoint into `model`, casting to each parameter's dtype."""
    state = load(path)
    model.assign_names()
    params = dict(model.named_parameters())
    missing = params.keys() - state.keys()
    extra = state.keys() - params.keys()
    if missing or extra:
        raise ContractError(
            f"checkpoint/model mismatch: missing={sorted(missing)[:3]} extra={sorted(extra)[:3]}"
        )
    for name, p in params.items():
        arr = state[name]
        if arr.shape != p.data.shape:
            raise ContractError(f"{name}: checkpoint shape {arr.shape} != model {p.data.shape}")
        p.data = arr.astype(p.data.dtype)
    return model
