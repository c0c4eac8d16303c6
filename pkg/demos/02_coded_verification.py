"""
Verifying transactions without seeing them
==========================================

Each node holds one coded combination of the community shards and receives
one coded combination of a block's strips. Running the verification
polynomial on those coded inputs and decoding across nodes gives the same
verdict as checking every plaintext transaction.
"""

import random

import numpy as np

from codedchain.ledger import Shard, assemble_block
from codedchain.setting import Setting
from codedchain.verify import (binary_results, decode_result_column, encode_results, uncoded_indicator,
                               verify_strip)
from codedchain.workload import TxPool, genesis_shards, make_clients

st = Setting(N=16, K=2, Q=4, f=2)
F = st.F

# clients own genesis coins; one spend carries a broken signature
clients = make_clients(st, 4)
shards, coins = genesis_shards(st, clients)
pool = TxPool(st, clients, random.Random(0), balanced=True)
pool.add_coins(coins)
pool.tampers[(1, 0, 1, 0)] = "bad-signature"
T = st.T_for(1)
block, _ = assemble_block(pool.take(1), st.K, st.Q, st.layout(T))
print(f"block of {len(block.tx_ids())} transactions, lookup depth T={T}, degree d={st.d_for(1)}")

# what a trusted observer with all the plaintext would conclude
print("uncoded indicator:", uncoded_indicator(st, block, shards, T))

# what the nodes do: coded shard, coded strip, coded results
uncoded = np.stack([s.records for s in shards])
coded_h = F.matmul(st.G.entries.T, block.matrix())
R = st.layout(T).R
rows = []
for i in range(st.N):
    V = Shard(i, F.combine(st.G.entries[:, i], uncoded), True).tensor()
    rows.append(encode_results(st, verify_strip(st, coded_h[i].reshape(-1, R), V, T)))

# two nodes corrupt their result rows; node 5 still decodes the right verdict
rows[3] = F.random_vector(np.random.default_rng(1), rows[3].shape)
rows[12] = F.random_vector(np.random.default_rng(2), rows[12].shape)
s = decode_result_column(st, {i: rows[i][5] for i in range(st.N)}, 1)
print("node 5 indicator: ", binary_results(s))
