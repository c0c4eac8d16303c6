import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from codedchain.coding import DecodeError
from codedchain.crypto import Keyring
from codedchain.ledger import lookup_matrix
from codedchain.verify import (InvalidIndicator, ProtocolError, apply_indicator, binary_results,
                               decode_result_column, extract_indicator, fetch, merge_indicators,
                               partial_indicator, uncoded_indicator)
from coded_world import World, expected_column, uncoded_results


def test_fetch_one_hot_exhaustive():
    from codedchain.field import PrimeField
    F = PrimeField(2**31 - 1)
    V = F.random_vector(np.random.default_rng(0), (8, 5))
    for j in range(8):
        assert np.array_equal(fetch(F, lookup_matrix(j, 3), V), V[j])
    U = np.stack([lookup_matrix(j, 3) for j in range(8)])
    assert np.array_equal(fetch(F, U, V), V)
    with pytest.raises(ValueError):
        fetch(F, lookup_matrix(0, 2), V)


@given(st.lists(st.integers(0, 100), min_size=3, max_size=3), st.lists(st.integers(0, 100), min_size=3, max_size=3))
def test_fetch_is_multilinear(a, b):
    from codedchain.field import PrimeField
    F = PrimeField(101)
    V = np.arange(16, dtype=np.int64).reshape(8, 2) % 101
    u1 = np.stack([np.array([x, 1]) for x in a])
    u2 = np.stack([np.array([x, 1]) for x in b])
    u3 = u1.copy()
    u3[0] = (u1[0] + u2[0]) % 101
    u2f = u1.copy()
    u2f[0] = u2[0]
    lhs = fetch(F, u3, V)
    assert np.array_equal(lhs, (fetch(F, u1, V) + fetch(F, u2f, V)) % 101)


@pytest.fixture(scope="module")
def honest_world(small_setting):
    return World(small_setting)


@pytest.fixture(scope="module")
def tampered_world(small_setting):
    return World(small_setting, {(1, 0, 1, 0): "bad-signature", (1, 1, 1, 2): "wrong-key"})


def test_valid_transactions_verify_to_zero(honest_world):
    w = honest_world
    for j in range(w.st.K):
        assert not uncoded_results(w, j).any()
    assert not uncoded_indicator(w.st, w.block, w.shards, w.T).any()


def test_invalid_transactions_are_flagged(tampered_world):
    w = tampered_world
    res = uncoded_results(w, 1)
    Q = w.st.Q
    bad = (res != 0).any(axis=1)
    assert bad[0] and bad[Q + 2] and bad.sum() == 2
    assert uncoded_indicator(w.st, w.block, w.shards, w.T).tolist() == [1, 0, 0, 0, 0, 0, 1, 0]


@pytest.mark.parametrize("world", ["honest_world", "tampered_world"])
def test_coded_results_decode_to_uncoded(world, request):
    w = request.getfixturevalue(world)
    g = uncoded_indicator(w.st, w.block, w.shards, w.T)
    for j in range(w.st.N):
        s = decode_result_column(w.st, w.column(j), 1)
        assert np.array_equal(s, expected_column(w, j))
        assert binary_results(s).tolist() == g.tolist()


def test_decode_tolerates_f_corruptions(tampered_world):
    w = tampered_world
    st = w.st
    rng = np.random.default_rng(5)
    for trial in range(200):
        j = trial % st.N
        col = w.column(j)
        for i in rng.choice(st.N, st.f, replace=False):
            col[int(i)] = st.F.random_vector(rng, col[int(i)].shape)
        assert np.array_equal(decode_result_column(st, col, 1), expected_column(w, j))


def test_decode_fails_or_detects_beyond_budget(honest_world):
    """With f+1 corrupted symbols decoding never silently returns wrong results
    when the corruptions are consistent with another codeword's shape."""
    w = honest_world
    st = w.st
    truth = expected_column(w, 0)
    rng = np.random.default_rng(6)
    wrong = 0
    for bad in itertools.combinations(range(st.N), st.f + 1):
        col = w.column(0)
        for i in bad:
            col[i] = (col[i] + st.F.random_vector(rng, col[i].shape)) % st.F.q
        try:
            out = decode_result_column(st, col, 1)
        except DecodeError:
            continue
        wrong += not np.array_equal(out, truth)
    assert wrong == 0


def test_binary_results_and_filtering():
    s = np.array([[0, 0], [3, 0], [0, 0], [0, 1]])
    g = binary_results(s)
    assert g.tolist() == [0, 1, 0, 1]
    v = np.arange(8).reshape(4, 2) + 1
    assert apply_indicator(v, g).tolist() == [[1, 2], [0, 0], [5, 6], [0, 0]]


def test_indicator_merge_and_extract():
    N, f, K = 16, 2, 2
    keys = Keyring(N, f, K, b"ind")
    digest = b"h" * 32
    g = np.array([0, 1, 0, 1])
    collected = {i: partial_indicator(keys, i, g, digest) for i in range(N - f)}
    gw = merge_indicators(keys, collected, digest)
    assert extract_indicator(keys, gw, digest).tolist() == g.tolist()
    with pytest.raises(InvalidIndicator):
        extract_indicator(keys, gw, b"x" * 32)
    # f liars flipping a bit cannot reach either threshold for the wrong value
    liars = {i: partial_indicator(keys, i, 1 - g, digest) for i in range(f)}
    honest = {i: partial_indicator(keys, i, g, digest) for i in range(f, N - f)}
    assert extract_indicator(keys, merge_indicators(keys, {**liars, **honest}, digest), digest).tolist() == g.tolist()
    with pytest.raises(ProtocolError):
        merge_indicators(keys, {}, digest)
