"""Binary checkpoint format.

Layout::

    b"SCNV"                     magic
    u32 little-endian           format version (1)
    u32 little-endian           header length in bytes
    header                      UTF-8 JSON object
    float64 little-endian data  parameter buffers in header order

The header holds ``architecture``, ``input_shape``, ``seed``, ``epochs``,
an optional ``config`` echo and ``params``: a list of
``{name, shape, offset, nbytes}`` with offsets relative to the start of
the data section. Only weights are stored, not optimizer state.
"""

import json
import struct

import numpy as np

from .exceptions import CheckpointError, UnsupportedVersionError
from .model import LayerSpec, Model

MAGIC = b"SCNV"
VERSION = 1
_PREFIX = struct.Struct("<4sII")
_LE_F64 = np.dtype("<f8")


def checkpoint_bytes(model, seed=None, epochs=0, config=None):
    manifest, offset = [], 0
    for name, p in model.params.items():
        nbytes = p.size * 8
        manifest.append({"name": name, "shape": list(p.shape), "offset": offset, "nbytes": nbytes})
        offset += nbytes
    header = {
        "architecture": [s.to_dict() for s in model.specs],
        "input_shape": list(model.input_shape),
        "seed": seed,
        "epochs": epochs,
        "config": config,
        "params": manifest,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(p, dtype=_LE_F64).tobytes() for p in model.params.values())
    return _PREFIX.pack(MAGIC, VERSION, len(head)) + head + body


def save_checkpoint(model, path, seed=None, epochs=0, config=None):
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model, seed=seed, epochs=epochs, config=config))


def parse_checkpoint(data):
    """Decode checkpoint bytes into ``(model, header)``."""
    if len(data) < _PREFIX.size:
        raise CheckpointError("prefix", f"file is {len(data)} bytes, shorter than the {_PREFIX.size}-byte prefix")
    magic, version, head_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("magic", f"expected {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(version, VERSION)
    start = _PREFIX.size
    if len(data) < start + head_len:
        raise CheckpointError("header", f"truncated: need {head_len} bytes")
    try:
        header = json.loads(data[start:start + head_len].decode("utf-8"))
        specs = [LayerSpec.from_dict(d) for d in header["architecture"]]
        input_shape = tuple(header["input_shape"])
        entries = header["params"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise CheckpointError("header", f"malformed header: {exc}") from None
    body = data[start + head_len:]
    params = {}
    for entry in entries:
        name = entry["name"]
        shape = tuple(entry["shape"])
        off, nbytes = entry["offset"], entry["nbytes"]
        if nbytes != int(np.prod(shape)) * 8:
            raise CheckpointError(f"params.{name}", f"byte count {nbytes} disagrees with shape {shape}")
        if off + nbytes > len(body):
            raise CheckpointError(f"params.{name}", "data section truncated")
        arr = np.frombuffer(body, dtype=_LE_F64, count=nbytes // 8, offset=off)
        params[name] = arr.astype(np.float64).reshape(shape)
    try:
        model = Model(specs, params, input_shape)
    except ValueError as exc:
        raise CheckpointError("params", str(exc)) from None
    return model, header


def load_checkpoint(path, with_header=False):
    with open(path, "rb") as fh:
        model, header = parse_checkpoint(fh.read())
    return (model, header) if with_header else model
