"""Latent vector files: 8-byte magic, two little-endian uint64 (rows, dim), then '<f8' data."""

import struct
from pathlib import Path

import numpy as np

from .errors import DomainError

MAGIC = b"SSBLAT01"
_HEADER = struct.Struct("<8sQQ")


def write_latents(path, latents):
    z = np.atleast_2d(np.asarray(latents, dtype="<f8"))
    if z.ndim != 2:
        raise DomainError("latents must be a vector or a 2-D array of row vectors")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, z.shape[0], z.shape[1]))
        fh.write(np.ascontiguousarray(z).tobytes())


def read_latents(path):
    """Return an (rows, dim) float array."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DomainError(f"{path}: file too short for a latent header")
    magic, rows, dim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DomainError(f"{path}: not a latent file (bad magic)")
    expected = _HEADER.size + 8 * rows * dim
    if len(raw) != expected:
        raise DomainError(f"{path}: expected {expected} bytes for {rows}x{dim}, found {len(raw)}")
    return np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(rows, dim).astype(float)
