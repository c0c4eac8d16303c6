import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codedchain.coding import EvalPoints, build_generator, encode_rows
from codedchain.crypto import (Checksum, CombineError, Keyring, PolyHash, UnknownSigner, agree, checksum,
                               fp, mq_eval, select, uov_keygen, uov_sign)
from codedchain.field import PrimeField

F = PrimeField(2**31 - 1)


@pytest.fixture(scope="module")
def keys():
    return Keyring(16, 5, 1, seed=b"t")


def test_sign_verify(keys):
    m = b"hello"
    s = keys.sign(3, m)
    assert keys.verify(3, m, s)
    assert not keys.verify(4, m, s)
    assert not keys.verify(3, b"hellp", s)
    with pytest.raises(UnknownSigner):
        keys.sign(16, m)


def test_bit_flips_rejected(keys):
    rng = random.Random(1)
    m = b"block"
    s = keys.sign(0, m)
    for _ in range(10_000):
        b = bytearray(s)
        k = rng.randrange(len(b) * 8)
        b[k // 8] ^= 1 << (k % 8)
        assert not keys.verify(0, m, bytes(b))


def test_ed25519_mode():
    ks = Keyring(4, 1, 1, seed=b"e", mode="ed25519")
    s = ks.sign(2, b"x")
    assert len(s) == 64 and ks.verify(2, b"x", s) and not ks.verify(1, b"x", s)


def test_threshold_combine(keys):
    m = b"qc"
    t = keys.scheme("pi").t
    assert t == 11
    parts = [keys.tpartial("pi", i, m) for i in range(14)]
    sig = keys.tcombine("pi", m, parts)
    assert keys.tverify("pi", m, sig) and len(sig.signers) == t
    assert not keys.tverify("pi", b"other", sig)
    assert not keys.tverify("tau", m, sig)
    with pytest.raises(CombineError):
        keys.tcombine("pi", m, parts[: t - 1])
    # duplicates and partials on another message do not count
    with pytest.raises(CombineError):
        keys.tcombine("pi", m, parts[:5] * 3 + [keys.tpartial("pi", 12, b"x")])


def test_scheme_thresholds():
    ks = Keyring(16, 3, 4)
    assert (ks.scheme("pi").t, ks.scheme("lambda").t, ks.scheme("tau").t) == (13, 7, 4)


def test_uov_roundtrip():
    k = uov_keygen(F, b"client", D=6, E=2)
    rng = np.random.default_rng(0)
    W = F.random_vector(rng, (1000, 2))
    S = np.stack([uov_sign(F, k, w) for w in W])
    assert np.array_equal(mq_eval(F, k.public, S, 2), W)
    S[:, 0] = (S[:, 0] + 1) % F.q
    assert (mq_eval(F, k.public, S, 2) != W).any(axis=1).mean() > 0.99


def test_uov_tiny_exhaustive():
    G = PrimeField(7)
    k = uov_keygen(G, b"tiny", D=4, E=2)
    grid = np.array(list(itertools.product(range(7), repeat=4)), dtype=np.int64)
    images = mq_eval(G, k.public, grid, 2)
    for w in [(0, 0), (3, 5), (6, 1)]:
        s = uov_sign(G, k, w)
        assert tuple(mq_eval(G, k.public, s, 2)) == w
        assert any((row == s).all() for row in grid[(images == w).all(axis=1)])


def test_polyhash_properties():
    h = PolyHash.derive(F, b"s", "h", 12, 3)
    assert h.degree() == 3
    assert not h(F, F.zeros(12)).any()
    x = F.random_vector(np.random.default_rng(1), 12)
    assert np.array_equal(h(F, x), PolyHash.derive(F, b"s", "h", 12, 3)(F, x))
    # scaling is not homogeneous, so there is a genuine cubic part
    assert not np.array_equal(h(F, 2 * x % F.q), 2 * h(F, x) % F.q)


def test_polyhash_no_collisions():
    h = PolyHash.derive(F, b"s", "h", 8, 2)
    X = F.random_vector(np.random.default_rng(2), (100_000, 8))
    out = h(F, X)
    keys = {tuple(r) for r in out}
    assert len(keys) == len({tuple(r) for r in X})


def test_fingerprint_homomorphic():
    rng = np.random.default_rng(3)
    r = select(F, F.random_vector(rng, (4, 2)), 2)
    assert not fp(F, r, F.zeros(10)).any()
    A = F.random_vector(rng, (1000, 10))
    B = F.random_vector(rng, (1000, 10))
    c = F.random_vector(rng, 1000)
    for a, b, k in zip(A, B, c):
        lhs = fp(F, r, (a + k * b) % F.q)
        assert np.array_equal(lhs, (fp(F, r, a) + k * fp(F, r, b)) % F.q)


def coded_setup(N=16, K=3, width=6, seed=0):
    G = build_generator(F, EvalPoints.standard(K, N))
    M = F.random_vector(np.random.default_rng(seed), (K, width))
    return G, M


def test_checksum_honest_agrees():
    G, M = coded_setup()
    cks, coded = checksum(F, G, M)
    assert isinstance(cks, Checksum)
    assert all(agree(F, G, cks, coded[i], i) for i in range(16))
    assert not agree(F, G, cks, coded[1], 0)
    assert not agree(F, G, cks, coded[0], 16)


def test_checksum_of_zero_block():
    G, _ = coded_setup()
    cks, coded = checksum(F, G, F.zeros((3, 6)))
    assert not cks.FP.any()
    assert agree(F, G, cks, coded[5], 5)


def test_equivocated_fragments_rejected():
    G, M = coded_setup(K=2, width=4)
    cks, _ = checksum(F, G, M)
    rng = np.random.default_rng(4)
    for t in range(10_000):
        other = encode_rows(F, G, F.random_vector(rng, (2, 4)))
        assert not agree(F, G, cks, other[t % 16], t % 16)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fingerprint_key_is_irreducible_monic(seed):
    rng = np.random.default_rng(seed)
    r = select(F, F.random_vector(rng, (3, 2)), 2)
    assert len(r) == 3 and r[-1] == 1
    # degree-2 monic with no root is irreducible
    c0, c1 = r[0], r[1]
    assert all((x * x + c1 * x + c0) % F.q != 0 for x in range(50))
