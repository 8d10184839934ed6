"""Embedding file formats.

``verse``: 4-byte magic ``VRSE``, u32 version, u64 n, u32 d, then n*d
little-endian float32 values row-major.  ``raw``: the same payload without a
header.  ``text``: one ``index v1 ... vd`` line per node, 6 significant digits.
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, ModelFormatError
from .trainer import EmbeddingModel

MAGIC = b"VRSE"
VERSION = 1
HEADER = struct.Struct("<4sIQI")
FORMATS = ("verse", "raw", "text")


def atomic_write(path, data: bytes) -> None:
    """Write via a temporary file in the target directory and rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode(matrix: np.ndarray, fmt: str = "verse") -> bytes:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ConfigError("embedding must be a 2-D matrix")
    n, d = matrix.shape
    if fmt == "verse":
        return HEADER.pack(MAGIC, VERSION, n, d) + matrix.tobytes()
    if fmt == "raw":
        return matrix.tobytes()
    if fmt == "text":
        lines = [f"{i} " + " ".join(f"{x:.6g}" for x in row) for i, row in enumerate(matrix.tolist())]
        return ("\n".join(lines) + "\n").encode()
    raise ConfigError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")


def save_model(model, path, fmt: str = "verse", concat_context: bool = False) -> None:
    matrix = model.embedding(concat_context) if isinstance(model, EmbeddingModel) else model
    atomic_write(path, encode(matrix, fmt))


def _decode_text(data: bytes, source) -> np.ndarray:
    rows = {}
    for lineno, line in enumerate(data.decode().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            rows[int(parts[0])] = [float(x) for x in parts[1:]]
        except ValueError:
            raise ModelFormatError(f"{source}:{lineno}: malformed embedding line") from None
    if not rows:
        raise ModelFormatError(f"{source}: empty embedding file")
    n = max(rows) + 1
    dims = {len(r) for r in rows.values()}
    if len(dims) != 1 or len(rows) != n:
        raise ModelFormatError(f"{source}: rows are missing or have unequal lengths")
    out = np.empty((n, dims.pop()), dtype=np.float32)
    for i, r in rows.items():
        out[i] = r
    return out


def decode(data: bytes, fmt: str | None = None, n: int | None = None, d: int | None = None,
           source="<bytes>") -> np.ndarray:
    if fmt is None:
        fmt = "verse" if data[:4] == MAGIC else "text"
    if fmt == "text":
        return _decode_text(data, source)
    if fmt == "raw":
        if n is None or d is None:
            raise ConfigError("raw format needs explicit n and d")
        payload = data
    elif fmt == "verse":
        if len(data) < HEADER.size:
            raise ModelFormatError(f"{source}: file shorter than the header")
        magic, version, n_hdr, d_hdr = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ModelFormatError(f"{source}: bad magic {magic!r}")
        if version != VERSION:
            raise ModelFormatError(f"{source}: unsupported version {version}")
        if (n is not None and n != n_hdr) or (d is not None and d != d_hdr):
            raise ModelFormatError(f"{source}: header says {n_hdr}x{d_hdr}, expected {n}x{d}")
        n, d = n_hdr, d_hdr
        payload = data[HEADER.size:]
    else:
        raise ConfigError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
    expected = n * d * 4
    if len(payload) != expected:
        raise ModelFormatError(f"{source}: payload has {len(payload)} bytes, {n}x{d} floats need {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(n, d).astype(np.float32)


def load_matrix(path, fmt: str | None = None, n: int | None = None, d: int | None = None) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read embedding {path}: {exc.strerror}") from exc
    return decode(data, fmt, n, d, source=path)


def load_model(path, fmt: str | None = None, n: int | None = None, d: int | None = None) -> EmbeddingModel:
    """Read an embedding file; the format is sniffed from the magic unless given."""
    return EmbeddingModel(load_matrix(path, fmt, n, d))
