"""Binary checkpoint format for score models.

Layout (little endian), documented in docs/formats.md:

    bytes 0..3   magic b"NMSC"
    u32          format version (currently 1)
    u32          header length in bytes
    header       JSON: {"arch": ..., "input_scale": ..., "meta": ...}
    u64          parameter count
    f64 * count  flat parameter vector

save -> load -> save is byte-identical.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .model import ScoreModel

MAGIC = b"NMSC"
VERSION = 1


def save(model: ScoreModel, path) -> None:
    header = json.dumps(
        {"arch": model.arch, "dtype": model.dtype.name,
         "input_scale": model.input_scale, "meta": model.meta},
        sort_keys=True, separators=(",", ":"),
    ).encode()
    params = model.get_params().astype("<f8")
    blob = (
        MAGIC
        + struct.pack("<II", VERSION, len(header))
        + header
        + struct.pack("<Q", params.size)
        + params.tobytes()
    )
    Path(path).write_bytes(blob)


def load(path) -> ScoreModel:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MAGIC:
        raise FormatError(f"not a score-model checkpoint: {path}")
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version} (expected {VERSION})")
    if len(data) < 12 + hlen + 8:
        raise FormatError(f"truncated checkpoint: {path}")
    try:
        header = json.loads(data[12:12 + hlen].decode())
        arch = header["arch"]
        input_scale = header["input_scale"]
        meta = header.get("meta", {})
        dtype = header.get("dtype", "float64")
    except (ValueError, KeyError) as exc:
        raise FormatError(f"corrupt checkpoint header: {path}") from exc
    (count,) = struct.unpack_from("<Q", data, 12 + hlen)
    if len(data) < 12 + hlen + 8 + 8 * count:
        raise FormatError(f"truncated parameter payload: {path}")
    params = np.frombuffer(data, dtype="<f8", count=count, offset=12 + hlen + 8)
    model = ScoreModel(arch, input_scale=input_scale, meta=meta, dtype=np.dtype(dtype))
    if count != model.param_count:
        raise FormatError("parameter count does not match architecture")
    model.set_params(params)
    return model
