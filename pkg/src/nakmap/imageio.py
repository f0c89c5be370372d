"""On-disk image formats.

Inputs: 8- or 16-bit binary portable graymaps (P5). Envelope images, score
fields, and parameter maps are stored as 32-bit float graymaps in the
portable-floatmap style ("Pf", little-endian via a negative scale header),
extended with "# key=value" comment lines carried between the magic and the
dimensions. Masked-out map pixels are stored as NaN. See docs/formats.md
for the exact byte layout.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import FormatError
from .maps import ParamMap


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 graymap, returning floats scaled to [0, 1]."""
    data = Path(path).read_bytes()
    try:
        tokens, offset = _header_tokens(data, 4)
        magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"malformed PGM header in {path}") from exc
    if magic != b"P5":
        raise FormatError(f"not a binary PGM: {path}")
    if maxval <= 0 or maxval > 65535:
        raise FormatError(f"unsupported maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = w * h
    if len(data) < offset + count * dtype.itemsize:
        raise FormatError(f"truncated PGM payload in {path}")
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return raw.reshape(h, w).astype(float) / maxval


def write_pgm(path, img: np.ndarray, maxval: int = 255) -> None:
    """Write values in [0, 1] as a binary P5 graymap."""
    img = np.asarray(img, dtype=float)
    q = np.clip(np.round(img * maxval), 0, maxval)
    payload = q.astype(">u2" if maxval > 255 else np.uint8).tobytes()
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode() + payload)


def _header_tokens(data: bytes, n: int) -> tuple[list[bytes], int]:
    """Collect n whitespace-separated header tokens, skipping '#' comments."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < n:
        if i >= len(data):
            raise FormatError("truncated header")
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i + 1  # single whitespace after the final token


def write_float_map(path, values: np.ndarray, meta: dict | None = None) -> None:
    """Write a 2-D float32 map with embedded key=value metadata comments."""
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise FormatError("float maps are 2-D")
    h, w = values.shape
    header = ["Pf"]
    for key, val in sorted((meta or {}).items()):
        header.append(f"# {key}={val}")
    header.append(f"{w} {h}")
    header.append("-1.0")
    payload = values[::-1].astype("<f4").tobytes()  # bottom-up row order
    Path(path).write_bytes(("\n".join(header) + "\n").encode() + payload)


def read_float_map(path) -> tuple[np.ndarray, dict]:
    """Read a float map back; returns (values, metadata)."""
    data = Path(path).read_bytes()
    meta = {}
    for line in data.split(b"\n", 64):
        if line.startswith(b"#") and b"=" in line:
            key, _, val = line[1:].decode(errors="replace").partition("=")
            meta[key.strip()] = val.strip()
        if line.strip() in (b"-1.0", b"1.0"):
            break
    try:
        tokens, offset = _header_tokens(data, 4)
        magic, w, h, scale = tokens[0], int(tokens[1]), int(tokens[2]), float(tokens[3])
    except (ValueError, IndexError, FormatError) as exc:
        raise FormatError(f"malformed float-map header in {path}") from exc
    if magic != b"Pf":
        raise FormatError(f"not a float map: {path}")
    dtype = "<f4" if scale < 0 else ">f4"
    if len(data) < offset + 4 * w * h:
        raise FormatError(f"truncated float-map payload in {path}")
    raw = np.frombuffer(data, dtype=dtype, count=w * h, offset=offset)
    return raw.reshape(h, w)[::-1].astype(float), meta


def write_param_map(path, pm: ParamMap, meta: dict | None = None) -> None:
    """Store a parameter map; invalid pixels become NaN."""
    merged = {k: v for k, v in pm.meta.items() if not isinstance(v, (list, dict))}
    merged.update(meta or {})
    write_float_map(path, np.where(pm.mask, pm.values, np.nan), merged)


def read_param_map(path) -> ParamMap:
    values, meta = read_float_map(path)
    mask = np.isfinite(values)
    return ParamMap(np.where(mask, values, 0.0), mask, meta)


def write_csv_map(path, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(values, dtype=float):
            writer.writerow([f"{v:.9g}" for v in row])
