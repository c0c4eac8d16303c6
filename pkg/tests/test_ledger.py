import numpy as np
import pytest
from hypothesis import given, strategies as st

from codedchain.ledger import (ClientTx, LedgerError, Shard, Transaction, TxLayout, append_records,
                               assemble_block, log2_ceil, lookup_matrix, shard_append, slot_index, strip)
from codedchain.setting import degree_for

LAY = TxLayout(T=3, B=4, C=2, D=2)


def tx(i, s, r, fill=None):
    v = np.full(LAY.R, i if fill is None else fill, dtype=np.int64)
    return ClientTx(i, s, r, v)


def test_layout_widths():
    assert LAY.A == 6
    assert LAY.R == 6 + 4 + 2 + 2
    assert LAY.W == 8
    x = np.arange(LAY.R)
    assert list(x[LAY.body]) == list(range(6, 14))


def test_empty_epoch_is_all_padding():
    B, deferred = assemble_block([], 2, 3, LAY)
    assert not B.matrix().any() and deferred == []
    assert all(t is None for t in B.tx_ids())


def test_routing_by_labels():
    B, _ = assemble_block([tx(7, 0, 1)], 2, 1, LAY)
    assert B.grid[0][1].tx_ids == (7,)
    assert not B.grid[0][0].rows.any() and not B.grid[1][1].rows.any()


def test_overflow_is_deferred_in_order():
    B, deferred = assemble_block([tx(1, 0, 0), tx(2, 0, 0), tx(3, 0, 0)], 2, 1, LAY)
    assert B.grid[0][0].tx_ids == (1,)
    assert [t.tx_id for t in deferred] == [2, 3]


def test_bad_transactions_rejected():
    with pytest.raises(LedgerError):
        assemble_block([tx(1, 0, 2)], 2, 1, LAY)
    with pytest.raises(LedgerError):
        assemble_block([ClientTx(1, 0, 0, np.zeros(3, dtype=np.int64))], 2, 1, LAY)


def grid_block(K, Q):
    txs = [tx(10 * s + r + 1, s, r) for s in range(K) for r in range(K) for _ in range(Q)]
    return assemble_block(txs, K, Q, LAY)[0]


def test_strips():
    B = grid_block(4, 1)
    rows = np.concatenate([strip(B, "outgoing", k).flat()[None] for k in range(4)])
    assert np.array_equal(rows, B.matrix())
    inc = strip(B, "incoming", 1)
    assert [tb.sender for tb in inc.tiny_blocks] == [0, 1, 2, 3]
    assert all(tb.receiver == 1 for tb in inc.tiny_blocks)
    assert np.array_equal(inc.flat(), B.transpose_matrix()[1])
    with pytest.raises(LedgerError):
        strip(B, "incoming", 4)


def test_symmetric_grid_strips_agree():
    txs = [tx(1, s, r, fill=s + r) for s in range(3) for r in range(3)]
    B = assemble_block(txs, 3, 1, LAY)[0]
    for k in range(3):
        assert np.array_equal(strip(B, "incoming", k).txs(), strip(B, "outgoing", k).txs())


def test_shard_growth():
    sh = Shard(0, np.zeros((8, LAY.W), dtype=np.int64))
    assert sh.T_exp == 3 and degree_for(sh.T_exp) == 4
    grown = append_records(sh, np.zeros((8, LAY.R), dtype=np.int64), LAY)
    assert grown.M == 16 and grown.T_exp == 4
    assert grown.tensor().shape == (16, LAY.W)
    odd = append_records(sh, np.ones((2, LAY.R), dtype=np.int64), LAY)
    assert odd.tensor().shape == (16, LAY.W) and not odd.tensor()[10:].any()


def test_shard_append_checks_index():
    B = grid_block(2, 1)
    sh = Shard(0, np.zeros((8, LAY.W), dtype=np.int64))
    assert shard_append(sh, strip(B, "incoming", 0), LAY).M == 10
    with pytest.raises(LedgerError):
        shard_append(sh, strip(B, "incoming", 1), LAY)
    with pytest.raises(LedgerError):
        shard_append(sh, strip(B, "outgoing", 0), LAY)


@given(st.integers(1, 8), st.data())
def test_lookup_matrix_roundtrip(T, data):
    j = data.draw(st.integers(0, 2**T - 1))
    u = lookup_matrix(j, T)
    assert u.shape == (T, 2) and (u.sum(axis=1) == 1).all()
    assert slot_index(u) == j


def test_lookup_is_msb_first():
    assert lookup_matrix(2, 3).tolist() == [[1, 0], [0, 1], [1, 0]]
    with pytest.raises(LedgerError):
        lookup_matrix(8, 3)


def test_transaction_roundtrip():
    v = np.arange(LAY.R, dtype=np.int64) % 2
    v[LAY.u] = lookup_matrix(5, 3).reshape(-1)
    t = Transaction.from_vector(v, LAY)
    assert np.array_equal(t.serialize(), v)
    assert t.is_lookup_valid()


@pytest.mark.parametrize("M,T", [(1, 0), (2, 1), (8, 3), (9, 4), (16, 4), (17, 5)])
def test_log2_ceil(M, T):
    assert log2_ceil(M) == T
