"""A one-epoch coded world: clients, genesis shards, one block and every
node's encoded verification results."""

import random

import numpy as np

from codedchain.ledger import Shard, assemble_block
from codedchain.verify import encode_results, verify_strip, verify_tx
from codedchain.workload import TxPool, genesis_shards, make_clients


class World:
    def __init__(self, st, tampers=None, seed=0):
        self.st = st
        F = st.F
        clients = make_clients(st, 4)
        self.shards, coins = genesis_shards(st, clients)
        pool = TxPool(st, clients, random.Random(seed), balanced=True)
        pool.add_coins(coins)
        pool.tampers.update(tampers or {})
        self.T = st.T_for(1)
        self.block, _ = assemble_block(pool.take(1), st.K, st.Q, st.layout(self.T))
        uncoded = np.stack([s.records for s in self.shards])
        self.coded_shards = [Shard(i, F.combine(st.G.entries[:, i], uncoded), True) for i in range(st.N)]
        coded_h = F.matmul(st.G.entries.T, self.block.matrix())
        R = st.layout(self.T).R
        self.results = [encode_results(st, verify_strip(st, coded_h[i].reshape(-1, R),
                                                        self.coded_shards[i].tensor(), self.T))
                        for i in range(st.N)]

    def column(self, j):
        return {i: self.results[i][j] for i in range(self.st.N)}


def uncoded_results(w, r):
    """Results for the txs received by community r, sender-major."""
    st = w.st
    return np.concatenate([verify_tx(st, w.block.grid[k][r].rows, w.shards[k].tensor(), w.T)
                           for k in range(st.K)])


def expected_column(w, j):
    """Node j's share: receiver results combined by its generator column."""
    st = w.st
    return st.F.combine(st.G.entries[:, j], np.stack([uncoded_results(w, r) for r in range(st.K)]))
