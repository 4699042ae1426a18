import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ssblab.channel import capacity
from ssblab.codes import (
    RepetitionCode,
    best_repetition_rate,
    codebook_length,
    codebook_words,
    int_to_message,
    message_error,
    message_to_int,
    nearest_codewords,
    pack_bits,
    repetition_bit_error,
    repetition_decode,
    repetition_encode,
    shannon_rate,
)
from ssblab.errors import DimensionError, DomainError, InfeasibleError
from ssblab.numerics import RngStream


def oracle_bit_error(r, p):
    return float(stats.binom.sf((r - 1) // 2, r, p))


def oracle_best_r(p, M, target):
    r = 1
    while 1 - (1 - oracle_bit_error(r, p)) ** M > target:
        r += 2
    return r


def test_encode_decode_examples():
    assert repetition_encode([1, 0], 3).tolist() == [1, 1, 1, 0, 0, 0]
    assert repetition_encode([1, 0, 1], 1).tolist() == [1, 0, 1]
    assert repetition_decode([1, 1, 0], 3).tolist() == [1]
    assert repetition_decode([0, 1, 0, 1, 1, 1], 3).tolist() == [0, 1]
    code = RepetitionCode(5)
    assert code.decode(code.encode([0, 1])).tolist() == [0, 1]


def test_encode_decode_errors():
    for r in (0, 2, -3, 2.5):
        with pytest.raises(DomainError):
            repetition_encode([1], r)
    with pytest.raises(DomainError):
        RepetitionCode(4)
    with pytest.raises(DimensionError):
        repetition_decode([1, 0], 3)
    with pytest.raises(DomainError):
        repetition_encode([2], 3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=40), st.sampled_from([1, 3, 5, 9]), st.integers(0, 2**32 - 1))
def test_decode_survives_minority_flips(bits, r, seed):
    c = repetition_encode(bits, r).reshape(-1, r)
    rng = np.random.default_rng(seed)
    for block in c:
        n_flip = int(rng.integers(0, (r + 1) // 2))
        idx = rng.choice(r, size=n_flip, replace=False)
        block[idx] ^= 1
    assert repetition_decode(c.ravel(), r).tolist() == bits


def test_bit_error_examples():
    assert repetition_bit_error(1, 0.3) == pytest.approx(0.3, rel=1e-14)
    assert repetition_bit_error(3, 0.1) == pytest.approx(0.028, rel=1e-12)
    assert repetition_bit_error(51, 0.0) == 0.0
    assert repetition_bit_error(5, 0.5) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(DomainError):
        repetition_bit_error(3, 0.6)


def test_bit_error_against_binomial_tail():
    for r in (1, 3, 7, 21, 101, 1001):
        for p in (1e-4, 0.05, 0.11, 0.3, 0.49):
            assert repetition_bit_error(r, p) == pytest.approx(oracle_bit_error(r, p), rel=1e-9, abs=1e-300)


def test_bit_error_monotone():
    rs = range(1, 102, 2)
    ps = np.linspace(0, 0.5, 26)
    table = np.array([[repetition_bit_error(r, p) for p in ps] for r in rs])
    assert np.all(np.diff(table, axis=1) >= -1e-12 * table[:, 1:])
    assert np.all(np.diff(table, axis=0) <= 1e-12 * table[1:])


@pytest.mark.parametrize("r", [3, 5, 9])
@pytest.mark.parametrize("p", [0.05, 0.15, 0.3])
def test_majority_vote_simulation(r, p):
    n = 10**5
    gen = RngStream(100 * r, int(p * 100)).generator()
    flips = gen.random((n, r)) < p
    wrong = repetition_decode(flips.astype(np.uint8).ravel(), r)
    rate = wrong.mean()
    pb = repetition_bit_error(r, p)
    assert abs(rate - pb) <= 4 * math.sqrt(pb * (1 - pb) / n)


def test_message_error():
    assert message_error(0.0, 32) == 0.0
    assert message_error(1.0, 5) == 1.0
    assert message_error(1e-9, 256) == pytest.approx(256e-9, rel=1e-6)


@pytest.mark.parametrize("p", [0.05, 0.11, 0.25])
@pytest.mark.parametrize("M", [32, 256])
def test_best_rate_matches_exhaustive_scan(p, M):
    rep = best_repetition_rate(p, M, 1e-6)
    r = oracle_best_r(p, M, 1e-6)
    assert rep.r == r
    assert rep.rate == pytest.approx(1 / r)
    assert rep.achieved_pe <= rep.target_pe
    assert message_error(repetition_bit_error(r - 2, p), M) > 1e-6
    assert rep.rate < capacity(p)


def test_best_rate_edge_cases():
    rep = best_repetition_rate(0.0, 32, 1e-6)
    assert rep.r == 1 and rep.rate == 1.0
    assert best_repetition_rate(1e-12, 1, 1e-6).r == 1
    with pytest.raises(InfeasibleError):
        best_repetition_rate(0.4999, 256, 1e-12)
    for bad in [(0.5, 32, 1e-6), (0.1, 0, 1e-6), (0.1, 32, 0.0), (0.1, 32, 1.0)]:
        with pytest.raises(DomainError):
            best_repetition_rate(*bad)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=1e-3, max_value=0.3), st.integers(1, 300), st.sampled_from([1e-3, 1e-6, 1e-9]))
def test_best_rate_is_minimal(p, M, target):
    rep = best_repetition_rate(p, M, target)
    assert rep.achieved_pe <= target
    if rep.r > 1:
        assert message_error(repetition_bit_error(rep.r - 2, p), M) > target


def test_shannon_rate():
    assert shannon_rate(0.0).rate == 1.0
    assert shannon_rate(0.5).rate == pytest.approx(0.0, abs=1e-15)
    assert shannon_rate(0.11).rate == pytest.approx(0.5001, abs=1e-4)
    assert shannon_rate(0.11).scheme == "shannon"


def test_codebook_length():
    p = 0.11
    n = codebook_length(32, p, 0.8)
    assert n == math.ceil(32 / (0.8 * capacity(p)))
    assert 32 / n <= 0.8 * capacity(p)
    with pytest.raises(InfeasibleError):
        codebook_length(32, 0.5)
    with pytest.raises(DomainError):
        codebook_length(32, 0.1, 0.0)


def test_codebook_deterministic_and_distinct():
    a = codebook_words(7, [0, 1, 2], 64)
    assert np.array_equal(a, codebook_words(7, [0, 1, 2], 64))
    assert np.array_equal(a[1], codebook_words(7, [1], 64)[0])
    assert not np.array_equal(a, codebook_words(8, [0, 1, 2], 64))
    assert a.dtype == np.uint8 and set(np.unique(a)) <= {0, 1}


def test_message_int_roundtrip():
    assert message_to_int([1, 0, 1]) == 5
    assert int_to_message(5, 4).tolist() == [0, 1, 0, 1]
    for v in (0, 1, 2**31 + 17, 2**40 - 1):
        assert message_to_int(int_to_message(v, 40)) == v
    with pytest.raises(DomainError):
        int_to_message(16, 4)


def test_pack_bits_layout():
    bits = np.zeros((1, 70), dtype=np.uint8)
    bits[0, [0, 63, 64, 69]] = 1
    w = pack_bits(bits)
    assert w.shape == (1, 2) and w.dtype == np.dtype("<u8")
    assert int(w[0, 0]) == 1 | (1 << 63)
    assert int(w[0, 1]) == 1 | (1 << 5)


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_nearest_codewords(backend):
    gen = RngStream(3).generator()
    reg = gen.integers(0, 2, size=(50, 130), dtype=np.uint8)
    truth = gen.integers(0, 50, size=40)
    rx = reg[truth].copy()
    flips = gen.random(rx.shape) < 0.05
    rx[flips] ^= 1
    idx, dist = nearest_codewords(rx, reg, backend=backend)
    assert np.array_equal(idx, truth)
    brute = (rx[:, None, :] != reg[None, :, :]).sum(axis=2)
    assert np.array_equal(dist, brute.min(axis=1))
    assert np.array_equal(idx, brute.argmin(axis=1))


def test_nearest_backends_agree_and_validate():
    gen = RngStream(4).generator()
    reg = gen.integers(0, 2, size=(30, 64), dtype=np.uint8)
    rx = gen.integers(0, 2, size=(20, 64), dtype=np.uint8)
    a = nearest_codewords(rx, reg, backend="numba")
    b = nearest_codewords(rx, reg, backend="numpy")
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    with pytest.raises(DimensionError):
        nearest_codewords(rx[:, :10], reg)
    with pytest.raises(DomainError):
        nearest_codewords(rx, np.zeros((0, 64), dtype=np.uint8))
