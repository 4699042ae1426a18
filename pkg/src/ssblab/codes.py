"""Redundancy mechanisms: repetition codes and a keyed random codebook."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from ._accel import njit, resolve_backend
from .channel import capacity
from .errors import DimensionError, DomainError, InfeasibleError

# Largest odd repetition factor not above 10^6.
MAX_REPETITION = 999_999


@dataclass(frozen=True)
class RepetitionCode:
    r: int

    def __post_init__(self):
        _check_odd(self.r)

    def encode(self, message):
        return repetition_encode(message, self.r)

    def decode(self, codeword):
        return repetition_decode(codeword, self.r)


@dataclass(frozen=True)
class RateReport:
    scheme: str
    rate: float
    p: float
    target_pe: float
    achieved_pe: float
    r: int = 0


def _check_odd(r):
    if int(r) != r or r < 1 or r % 2 == 0:
        raise DomainError(f"repetition factor must be an odd positive integer, got {r}")
    return int(r)


def _bits(x):
    x = np.asarray(x)
    if x.ndim != 1:
        raise DimensionError("bit vectors must be one-dimensional")
    if x.size and not np.all((x == 0) | (x == 1)):
        raise DomainError("bit vectors must contain only 0 and 1")
    return x.astype(np.uint8)


def repetition_encode(message, r):
    return np.repeat(_bits(message), _check_odd(r))


def repetition_decode(codeword, r):
    """Majority vote per block of r bits."""
    r = _check_odd(r)
    c = _bits(codeword)
    if c.size % r:
        raise DimensionError(f"codeword length {c.size} is not a multiple of r={r}")
    return (c.reshape(-1, r).sum(axis=1) > r // 2).astype(np.uint8)


def _check_p(p, upper=0.5):
    p = float(p)
    if not 0.0 <= p <= upper:
        raise DomainError(f"p must lie in [0, {upper}], got {p}")
    return p


def repetition_bit_error(r, p):
    """P(Binomial(r, p) >= (r+1)/2), summed exactly in log space."""
    r = _check_odd(r)
    p = _check_p(p)
    if p == 0.0:
        return 0.0
    i = np.arange((r + 1) // 2, r + 1)
    log_terms = gammaln(r + 1) - gammaln(i + 1) - gammaln(r - i + 1) + i * math.log(p) + (r - i) * math.log1p(-p)
    return float(min(1.0, math.exp(logsumexp(log_terms))))


def message_error(bit_error, M):
    """Probability that at least one of M independent bits is wrong."""
    return float(-math.expm1(M * math.log1p(-bit_error))) if bit_error < 1.0 else 1.0


def best_repetition_rate(p, M, pe_target):
    """Smallest odd r meeting the message-level error target; rate 1/r."""
    p = float(p)
    if not 0.0 <= p < 0.5:
        raise DomainError(f"p must lie in [0, 0.5), got {p}")
    M = int(M)
    if M < 1:
        raise DomainError("M must be >= 1")
    if not 0.0 < pe_target < 1.0:
        raise DomainError("pe_target must lie in (0, 1)")

    def pe(r):
        return message_error(repetition_bit_error(r, p), M)

    if pe(1) <= pe_target:
        return RateReport("repetition", 1.0, p, pe_target, pe(1), 1)
    lo, hi = 1, 3
    while pe(hi) > pe_target:
        if hi >= MAX_REPETITION:
            raise InfeasibleError(f"no odd repetition factor up to 10^6 reaches Pe <= {pe_target:g} at p={p:g}")
        lo, hi = hi, min(2 * hi + 1, MAX_REPETITION)
    # Invariant: lo fails, hi meets the target; both odd.
    while hi - lo > 2:
        mid = lo + 2 * ((hi - lo) // 4)
        if pe(mid) <= pe_target:
            hi = mid
        else:
            lo = mid
    return RateReport("repetition", 1.0 / hi, p, pe_target, pe(hi), hi)


def shannon_rate(p, target_pe=0.0):
    """Capacity-achieving rate; the error of an ideal code vanishes with length."""
    p = _check_p(p)
    return RateReport("shannon", capacity(p), p, target_pe, 0.0)


# --- keyed random codebook --------------------------------------------------


def codebook_length(M, p, margin=0.8):
    """Codeword length carrying M message bits at rate margin * capacity(p)."""
    c = capacity(p)
    if not 0.0 < margin <= 1.0:
        raise DomainError("margin must lie in (0, 1]")
    if c <= 0.0:
        raise InfeasibleError(f"capacity is zero at p={p:g}; no positive rate is available")
    return int(math.ceil(M / (margin * c)))


def codebook_words(seed, messages, length):
    """Pseudorandom codewords for integer messages; row i encodes messages[i]."""
    messages = np.asarray(messages, dtype=np.uint64).ravel()
    out = np.empty((messages.size, int(length)), dtype=np.uint8)
    for i, m in enumerate(messages):
        gen = np.random.default_rng([int(seed), int(m)])
        out[i] = gen.integers(0, 2, size=int(length), dtype=np.uint8)
    return out


def message_to_int(bits):
    bits = _bits(bits)
    return int("".join(map(str, bits.tolist())) or "0", 2)


def int_to_message(value, M):
    if value < 0 or value >= 1 << M:
        raise DomainError(f"message {value} does not fit in {M} bits")
    return np.array([(value >> (M - 1 - i)) & 1 for i in range(M)], dtype=np.uint8)


def pack_bits(bits):
    """Pack rows of bits into uint64 words (zero-padded)."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    n_words = -(-bits.shape[1] // 64)
    padded = np.zeros((bits.shape[0], n_words * 64), dtype=np.uint8)
    padded[:, : bits.shape[1]] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").reshape(bits.shape[0], n_words)


@njit(cache=True)
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def _nearest_numba(queries, registry):
    nq, nw = queries.shape
    nr = registry.shape[0]
    best = np.empty(nq, dtype=np.int64)
    dist = np.empty(nq, dtype=np.int64)
    for q in range(nq):
        bi = -1
        bd = nw * 64 + 1
        for j in range(nr):
            d = 0
            for w in range(nw):
                d += _popcount64(queries[q, w] ^ registry[j, w])
            if d < bd:
                bd = d
                bi = j
        best[q] = bi
        dist[q] = bd
    return best, dist


def _nearest_numpy(queries, registry):
    best = np.empty(queries.shape[0], dtype=np.int64)
    dist = np.empty(queries.shape[0], dtype=np.int64)
    for q in range(queries.shape[0]):
        d = np.bitwise_count(registry ^ queries[q]).sum(axis=1, dtype=np.int64)
        best[q] = int(np.argmin(d))
        dist[q] = d[best[q]]
    return best, dist


def nearest_codewords(received, registry, backend=None):
    """Index and Hamming distance of the closest registry row for each received word.

    Ties resolve to the lowest index.
    """
    received = np.atleast_2d(received)
    registry = np.atleast_2d(registry)
    if received.shape[1] != registry.shape[1]:
        raise DimensionError("received words and registry rows differ in length")
    if registry.shape[0] == 0:
        raise DomainError("registry is empty")
    q, reg = pack_bits(received), pack_bits(registry)
    if resolve_backend(backend) == "numba":
        return _nearest_numba(q, reg)
    return _nearest_numpy(q, reg)
