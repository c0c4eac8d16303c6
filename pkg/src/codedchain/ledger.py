"""Transactions, tiny blocks, blocks, strips and shards.

Indices are 0-based throughout: communities 0..K-1, nodes 0..N-1. A shard
slot at flat index j is addressed by the binary expansion of j, most
significant bit first, so lookup row t selects bit t.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .field import PrimeField


class LedgerError(ValueError):
    pass


def log2_ceil(M: int) -> int:
    return max(M - 1, 0).bit_length()


@dataclass(frozen=True)
class TxLayout:
    """Serialized transaction u-rows | p | a | s, and the stored record p | a | s."""
    T: int
    B: int
    C: int
    D: int

    @property
    def A(self) -> int:
        return 2 * self.T

    @property
    def R(self) -> int:
        return 2 * self.T + self.B + self.C + self.D

    @property
    def u(self) -> slice:
        return slice(0, self.A)

    @property
    def p(self) -> slice:
        return slice(self.A, self.A + self.B)

    @property
    def a(self) -> slice:
        return slice(self.A + self.B, self.A + self.B + self.C)

    @property
    def s(self) -> slice:
        return slice(self.A + self.B + self.C, self.R)

    @property
    def signed(self) -> slice:
        """The u | p | a prefix covered by the signature hash."""
        return slice(0, self.A + self.B + self.C)

    @property
    def body(self) -> slice:
        return slice(self.A, self.R)

    @property
    def W(self) -> int:
        return self.B + self.C + self.D

    @property
    def record_a(self) -> slice:
        return slice(self.B, self.B + self.C)


@dataclass(frozen=True)
class Transaction:
    u: np.ndarray   # T x 2 lookup matrix
    p: np.ndarray   # MQ public key
    a: np.ndarray   # recipient address
    s: np.ndarray   # signature

    def serialize(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.u).reshape(-1), self.p, self.a, self.s])

    @classmethod
    def from_vector(cls, vec, layout: TxLayout) -> "Transaction":
        vec = np.asarray(vec)
        if vec.shape != (layout.R,):
            raise LedgerError(f"expected length {layout.R}, got {vec.shape}")
        return cls(vec[layout.u].reshape(layout.T, 2), vec[layout.p], vec[layout.a], vec[layout.s])

    def is_lookup_valid(self) -> bool:
        u = np.asarray(self.u)
        return bool(np.all(np.sort(u, axis=1) == [0, 1]))


@dataclass(frozen=True)
class ClientTx:
    """A client transaction labelled with its communities."""
    tx_id: int
    sender: int
    receiver: int
    vector: np.ndarray


@dataclass(frozen=True)
class TinyBlock:
    rows: np.ndarray                      # Q x R
    sender: int
    receiver: int
    tx_ids: tuple[Optional[int], ...]     # None marks a padding row

    @property
    def pad_mask(self) -> np.ndarray:
        return np.array([t is None for t in self.tx_ids])


@dataclass(frozen=True)
class Block:
    grid: tuple[tuple[TinyBlock, ...], ...]
    epoch: int
    layout: TxLayout

    @property
    def K(self) -> int:
        return len(self.grid)

    @property
    def Q(self) -> int:
        return self.grid[0][0].rows.shape[0]

    @property
    def P(self) -> int:
        return self.Q * self.K ** 2

    def matrix(self) -> np.ndarray:
        """K rows; row k is outgoing strip k flattened (receiver-major)."""
        return np.stack([strip(self, "outgoing", k).flat() for k in range(self.K)])

    def transpose_matrix(self) -> np.ndarray:
        """K rows; row k is incoming strip k flattened (sender-major)."""
        return np.stack([strip(self, "incoming", k).flat() for k in range(self.K)])

    def tx_ids(self) -> list[int]:
        return [t for row in self.grid for tb in row for t in tb.tx_ids if t is not None]


@dataclass(frozen=True)
class Strip:
    kind: str
    index: int
    tiny_blocks: tuple[TinyBlock, ...]

    def txs(self) -> np.ndarray:
        """(K*Q) x R, one serialized transaction per row."""
        return np.concatenate([tb.rows for tb in self.tiny_blocks])

    def flat(self) -> np.ndarray:
        return self.txs().reshape(-1)

    def tx_ids(self) -> list[Optional[int]]:
        return [t for tb in self.tiny_blocks for t in tb.tx_ids]


def empty_tiny_block(Q: int, layout: TxLayout, sender: int, receiver: int, dtype=np.int64) -> TinyBlock:
    return TinyBlock(np.zeros((Q, layout.R), dtype=dtype), sender, receiver, (None,) * Q)


def assemble_block(txs, K: int, Q: int, layout: TxLayout, epoch: int = 0,
                   dtype=np.int64) -> tuple[Block, list[ClientTx]]:
    """Route transactions to grid[sender][receiver] in arrival order.

    At most Q per cell; the overflow is returned (FIFO per cell) for a later
    epoch. Unfilled rows are zero padding.
    """
    cells = defaultdict(list)
    deferred = []
    for tx in txs:
        if not (0 <= tx.sender < K and 0 <= tx.receiver < K):
            raise LedgerError(f"community out of range in tx {tx.tx_id}")
        if np.asarray(tx.vector).shape != (layout.R,):
            raise LedgerError(f"tx {tx.tx_id} has length {len(tx.vector)}, epoch needs {layout.R}")
        cell = cells[(tx.sender, tx.receiver)]
        if len(cell) < Q:
            cell.append(tx)
        else:
            deferred.append(tx)
    grid = []
    for k in range(K):
        row = []
        for r in range(K):
            rows = np.zeros((Q, layout.R), dtype=dtype)
            ids = [None] * Q
            for l, tx in enumerate(cells[(k, r)]):
                rows[l] = tx.vector
                ids[l] = tx.tx_id
            row.append(TinyBlock(rows, k, r, tuple(ids)))
        grid.append(tuple(row))
    return Block(tuple(grid), epoch, layout), deferred


def strip(B: Block, kind: str, k: int) -> Strip:
    if not 0 <= k < B.K:
        raise LedgerError(f"community {k} out of range")
    if kind == "outgoing":
        return Strip(kind, k, B.grid[k])
    if kind == "incoming":
        return Strip(kind, k, tuple(B.grid[s][k] for s in range(B.K)))
    raise LedgerError(f"unknown strip kind {kind!r}")


@dataclass(frozen=True)
class Shard:
    """Stored records (p | a | s) of a community's incoming strips, in order.

    For a coded shard `owner` is the node index and the records are that
    node's Lagrange combination of all K shards.
    """
    owner: int
    records: np.ndarray   # M x W
    coded: bool = False

    @property
    def M(self) -> int:
        return self.records.shape[0]

    @property
    def T_exp(self) -> int:
        return log2_ceil(self.M)

    def tensor(self) -> np.ndarray:
        """2**T_exp x W, zero beyond the last record."""
        size = 1 << self.T_exp
        out = np.zeros((size, self.records.shape[1]), dtype=self.records.dtype)
        out[: self.M] = self.records
        return out


def shard_append(shard: Shard, s: Strip, layout: TxLayout) -> Shard:
    if s.kind != "incoming" or s.index != shard.owner or shard.coded:
        raise LedgerError("only incoming strip k can extend shard k")
    return append_records(shard, s.txs(), layout)


def append_records(shard: Shard, txs: np.ndarray, layout: TxLayout) -> Shard:
    """Append transactions (full serialized rows) as stored records."""
    txs = np.asarray(txs)
    if txs.ndim != 2 or txs.shape[1] != layout.R:
        raise LedgerError(f"rows must have length {layout.R}")
    recs = txs[:, layout.body].astype(shard.records.dtype)
    return Shard(shard.owner, np.concatenate([shard.records, recs]), shard.coded)


def lookup_matrix(j: int, T: int, F: Optional[PrimeField] = None) -> np.ndarray:
    """One-hot T x 2 matrix selecting flat slot j (MSB first)."""
    if not 0 <= j < (1 << T):
        raise LedgerError(f"slot {j} outside a 2**{T} tensor")
    u = np.zeros((T, 2), dtype=np.int64 if F is None else F.dtype)
    for t in range(T):
        bit = (j >> (T - 1 - t)) & 1
        u[t, bit] = 1
    return u


def slot_index(u) -> int:
    """Inverse of lookup_matrix for one-hot u."""
    j = 0
    for row in np.asarray(u):
        j = (j << 1) | int(row[1] == 1)
    return j


def serialize_block(B: Block) -> np.ndarray:
    """Row-major grid of tiny blocks, each row-major."""
    return np.concatenate([tb.rows.reshape(-1) for row in B.grid for tb in row])


def to_bytes(vec) -> bytes:
    """Little-endian fixed-width encoding of field elements."""
    arr = np.asarray(vec)
    if arr.dtype == object:
        return b"".join(int(x).to_bytes(16, "little") for x in arr.reshape(-1))
    return arr.astype("<i8").tobytes()
