"""Secret carrier matrices: derivation, latent embedding, decoding."""

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, DomainError
from .lattice import lattice_decide
from .numerics import as_generator

KEY_FILE_VERSION = 1
MAX_COLUMN_ENTRY = 0.9
MAX_NONCE_ATTEMPTS = 64


@dataclass(frozen=True)
class SecretKey:
    key_bytes: bytes
    L: int
    M_prime: int
    nonce: int = 0

    def __post_init__(self):
        if len(self.key_bytes) != 32:
            raise DomainError("key_bytes must be exactly 32 bytes")
        if int(self.L) < 1 or int(self.M_prime) < 1:
            raise DomainError("L and M_prime must be positive")
        if int(self.M_prime) > int(self.L):
            raise DimensionError(f"M_prime={self.M_prime} exceeds L={self.L}")

    @classmethod
    def generate(cls, L, M_prime, seed=None):
        """Fresh key; with ``seed`` the key bytes are a deterministic function of it."""
        if seed is None:
            key_bytes = os.urandom(32)
        else:
            key_bytes = hashlib.sha256(b"ssblab-key" + int(seed).to_bytes(8, "little")).digest()
        return cls(key_bytes, int(L), int(M_prime))

    def fingerprint(self):
        return hashlib.sha256(self.key_bytes).hexdigest()[:16]

    def to_json(self):
        return {
            "version": KEY_FILE_VERSION,
            "L": int(self.L),
            "m_prime": int(self.M_prime),
            "key_hex": self.key_bytes.hex(),
            "nonce": int(self.nonce),
        }

    @classmethod
    def from_json(cls, doc):
        if doc.get("version") != KEY_FILE_VERSION:
            raise DomainError(f"unsupported key file version {doc.get('version')!r}")
        extra = set(doc) - {"version", "L", "m_prime", "key_hex", "nonce"}
        if extra:
            raise DomainError(f"unknown key file fields: {sorted(extra)}")
        key_hex = doc["key_hex"]
        if len(key_hex) != 64:
            raise DomainError("key_hex must be 64 hex characters")
        return cls(bytes.fromhex(key_hex), int(doc["L"]), int(doc["m_prime"]), int(doc.get("nonce", 0)))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class CarrierMatrix:
    """L x M' matrix with orthonormal columns; read-only."""

    U: np.ndarray
    nonce: int = 0

    def __post_init__(self):
        U = np.array(self.U, dtype=float)
        if U.ndim != 2 or U.shape[1] > U.shape[0]:
            raise DimensionError(f"carrier must be L x M' with M' <= L, got {U.shape}")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @property
    def L(self):
        return self.U.shape[0]

    @property
    def M_prime(self):
        return self.U.shape[1]

    def to_csv(self, path):
        np.savetxt(path, self.U, delimiter=",", fmt="%.17g")


def _philox_for(key_bytes, nonce):
    digest = hashlib.sha256(key_bytes + int(nonce).to_bytes(8, "little")).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest[:16], "little")))


def orthonormal_columns(G):
    """QR-orthonormalize columns, signs fixed so diag(R) > 0."""
    Q, R = np.linalg.qr(G)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def derive_carrier(key: SecretKey) -> CarrierMatrix:
    """Deterministic carrier from the key bytes, starting at ``key.nonce``.

    A draw with any column entry of magnitude >= 0.9 is rejected and the nonce
    incremented; the accepted nonce is recorded on the result so a key file
    can pin it.
    """
    for nonce in range(int(key.nonce), int(key.nonce) + MAX_NONCE_ATTEMPTS):
        gen = _philox_for(key.key_bytes, nonce)
        U = orthonormal_columns(gen.standard_normal((key.L, key.M_prime)))
        if np.max(np.abs(U)) < MAX_COLUMN_ENTRY:
            return CarrierMatrix(U, nonce)
    raise DomainError(
        f"no admissible carrier within {MAX_NONCE_ATTEMPTS} nonces for L={key.L}, M'={key.M_prime}; "
        "L is too small to spread every column"
    )


def random_carrier(L, M_prime, rng):
    """Unkeyed random carrier, e.g. an attacker's blind guess."""
    gen = as_generator(rng)
    return CarrierMatrix(orthonormal_columns(gen.standard_normal((L, M_prime))))


def _matrix(U):
    return U.U if isinstance(U, CarrierMatrix) else np.asarray(U, dtype=float)


def embed_latent(U, z_u, rng):
    """z = (I - U U^T) z' + U z_u with z' ~ N(0, I_L); rows of ``z_u`` batch."""
    Um = _matrix(U)
    z_u = np.asarray(z_u, dtype=float)
    if z_u.shape[-1] != Um.shape[1]:
        raise DimensionError(f"watermark vector has length {z_u.shape[-1]}, carrier expects {Um.shape[1]}")
    gen = as_generator(rng)
    z_prime = gen.standard_normal(z_u.shape[:-1] + (Um.shape[0],))
    return z_prime - (z_prime @ Um) @ Um.T + z_u @ Um.T


def project_to_watermark(U, z_hat):
    Um = _matrix(U)
    z_hat = np.asarray(z_hat, dtype=float)
    if z_hat.shape[-1] != Um.shape[0]:
        raise DimensionError(f"latent has length {z_hat.shape[-1]}, carrier expects {Um.shape[0]}")
    return z_hat @ Um


def decode(U, z_hat, delta_coarse):
    return lattice_decide(project_to_watermark(U, z_hat), delta_coarse)
