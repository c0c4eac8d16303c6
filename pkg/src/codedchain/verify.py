"""The polynomial verification pipeline.

Every function here runs the same arithmetic on coded and uncoded inputs;
nothing branches on whether a strip is a Lagrange combination.
"""

from __future__ import annotations

import numpy as np

from .coding import encode_vector, result_to_uncoded, rs_decode
from .crypto import Keyring, PartialSig, ThresholdSig, CombineError, canonical, mq_eval
from .field import PrimeField
from .setting import Setting


class ProtocolError(RuntimeError):
    """A step that only fails when the fault budget is exceeded."""


class InvalidIndicator(ProtocolError):
    pass


def fetch(F: PrimeField, u, V) -> np.ndarray:
    """sum over i in {1,2}^T of prod_j u[j, i_j] * V[i_1..i_T].

    u may carry leading batch axes: u (..., T, 2) with V (2**T, W).
    """
    u = np.asarray(u)
    V = np.asarray(V)
    T = u.shape[-2]
    if V.shape[0] != 1 << T:
        raise ValueError(f"lookup depth {T} needs a 2**{T} tensor, got {V.shape[0]} slots")
    batch = u.shape[:-2]
    W = V.shape[1]
    X = np.broadcast_to(V, batch + V.shape)
    for t in range(T):
        X = X.reshape(batch + (2, -1, W))
        c0 = u[..., t, 0][..., None, None]
        c1 = u[..., t, 1][..., None, None]
        X = ((c0 * X[..., 0, :, :]) % F.q + (c1 * X[..., 1, :, :]) % F.q) % F.q
    return X.reshape(batch + (W,))


def check_addr(st: Setting, p, a_old) -> np.ndarray:
    return (st.hash1(st.F, p) - np.asarray(a_old)) % st.F.q


def check_sig(st: Setting, x, T: int) -> np.ndarray:
    lay = st.layout(T)
    x = np.asarray(x)
    mq = mq_eval(st.F, x[..., lay.p], x[..., lay.s], st.E)
    return (mq - st.hash2(T)(st.F, x[..., lay.signed])) % st.F.q


def verify_tx(st: Setting, x, V, T: int) -> np.ndarray:
    """Result entry in F_q^(C+E); zero iff the (uncoded) transaction is valid."""
    lay = st.layout(T)
    x = np.asarray(x)
    if x.shape[-1] != lay.R:
        raise ValueError(f"transaction length {x.shape[-1]} != {lay.R}")
    u = x[..., lay.u].reshape(x.shape[:-1] + (T, 2))
    old = fetch(st.F, u, V)
    addr = check_addr(st, x[..., lay.p], old[..., lay.record_a])
    return np.concatenate([addr, check_sig(st, x, T)], axis=-1)


def verify_strip(st: Setting, h, V, T: int) -> np.ndarray:
    """(K*Q) x (C+E) results for a strip of K*Q transactions."""
    h = np.asarray(h)
    if h.ndim == 1:
        h = h.reshape(st.K * st.Q, -1)
    if h.shape[0] != st.K * st.Q:
        raise ValueError(f"strip has {h.shape[0]} slots, expected {st.K * st.Q}")
    return verify_tx(st, h, V, T)


def encode_results(st: Setting, e) -> np.ndarray:
    """Row c_{i,*}: the node's K tiny result blocks combined by G_L (N x Q(C+E))."""
    e = np.asarray(e)
    blocks = e.reshape(st.K, -1)
    return np.stack(encode_vector(st.F, st.G, blocks))


def decode_result_column(st: Setting, column: dict, height: int) -> np.ndarray:
    """From signed entries c_{i,j} (i in a quorum) recover s~_j = R . (G_L)_j,
    shaped (K*Q) x (C+E), sender-major like an incoming strip."""
    L = st.L_for(height)
    decoded = rs_decode(st.F, column, L, st.points(L), st.f)
    s = result_to_uncoded(st.F, decoded, st.result_matrices(L).g_f_omega)
    return s.reshape(st.K * st.Q, st.C + st.E)


def binary_results(s) -> np.ndarray:
    s = np.asarray(s)
    return (s.reshape(s.shape[0], -1) != 0).any(axis=1).astype(np.int64)


def indicator_message(slot: int, bit: int, header_digest: bytes) -> bytes:
    return canonical("indicator", slot, bit, header_digest)


def partial_indicator(keys: Keyring, i: int, g_col, header_digest: bytes) -> list[PartialSig]:
    out = []
    for slot, bit in enumerate(np.asarray(g_col)):
        scheme = "lambda" if bit == 0 else "tau"
        out.append(keys.tpartial(scheme, i, indicator_message(slot, int(bit), header_digest)))
    return out


def merge_indicators(keys: Keyring, collected: dict, header_digest: bytes) -> list[ThresholdSig]:
    """Per slot: K+f endorsements of 0 give a lambda signature, otherwise
    f+1 endorsements of 1 give a tau signature."""
    if not collected:
        raise ProtocolError("no partial indicators")
    n_slots = len(next(iter(collected.values())))
    merged = []
    for slot in range(n_slots):
        zeros = [gw[slot] for gw in collected.values() if gw[slot].scheme == "lambda"]
        ones = [gw[slot] for gw in collected.values() if gw[slot].scheme == "tau"]
        try:
            merged.append(keys.tcombine("lambda", indicator_message(slot, 0, header_digest), zeros))
            continue
        except CombineError:
            pass
        try:
            merged.append(keys.tcombine("tau", indicator_message(slot, 1, header_digest), ones))
        except CombineError:
            raise ProtocolError(f"slot {slot}: neither threshold reached") from None
    return merged


def extract_indicator(keys: Keyring, gw, header_digest: bytes) -> np.ndarray:
    g = np.zeros(len(gw), dtype=np.int64)
    for slot, sig in enumerate(gw):
        bit = 0 if getattr(sig, "scheme", None) == "lambda" else 1
        scheme = "lambda" if bit == 0 else "tau"
        if not keys.tverify(scheme, indicator_message(slot, bit, header_digest), sig):
            raise InvalidIndicator(f"slot {slot} carries no valid threshold signature")
        g[slot] = bit
    return g


def apply_indicator(v, g) -> np.ndarray:
    """Zero the coded transaction in every slot flagged by g."""
    v = np.array(v, copy=True)
    v[np.asarray(g, dtype=bool)] = 0
    return v


def uncoded_indicator(st: Setting, block, shards, T: int) -> np.ndarray:
    """Brute-force indicator: verify every transaction of the block directly.

    Slot (k, l) is flagged when any tx b_{k,r}[l] fails against shard k.
    """
    g = np.zeros(st.K * st.Q, dtype=np.int64)
    for k in range(st.K):
        V = shards[k].tensor()
        for r in range(st.K):
            res = verify_tx(st, block.grid[k][r].rows, V, T)
            bad = (res != 0).any(axis=1)
            g[k * st.Q:(k + 1) * st.Q] |= bad.astype(np.int64)
    return g
