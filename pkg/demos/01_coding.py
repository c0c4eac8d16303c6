"""
Lagrange coding over a prime field
==================================

K shards are spread over N nodes by evaluating the polynomial that passes
through the shards. Any K coded rows recover the data, and a polynomial
computed on coded rows can be decoded even when some nodes lie.
"""

import numpy as np

from codedchain.coding import EvalPoints, build_generator, build_result_matrices, encode_rows, rs_decode
from codedchain.field import PrimeField

F = PrimeField(2**31 - 1)
rng = np.random.default_rng(0)

# three shards of five field elements each, coded for twelve nodes
K, N = 3, 12
G = build_generator(F, EvalPoints.standard(K, N))
shards = F.random_vector(rng, (K, 5))
coded = encode_rows(F, G, shards)
print("generator columns sum to one:", bool((G.entries.sum(axis=0) % F.q == 1).all()))

# any K columns of the generator are invertible, so any K nodes can rebuild the shards
pick = [2, 7, 11]
back = F.matmul(F.inv_matrix(G.entries[:, pick].T), coded[pick])
print("shards from nodes", pick, "->", np.array_equal(back, shards))

# every node squares its coded row; the results lie on a degree 2(K-1) polynomial
d = 2
L = (K - 1) * d + 1
points = EvalPoints.standard(K, N, L)
results = {i: (coded[i] * coded[i]) % F.q for i in range(N)}

# two nodes report garbage, which the decoder tolerates because N >= L + 2*2
for liar in (4, 9):
    results[liar] = F.random_vector(rng, 5)
at_beta = rs_decode(F, results, L, points, max_errors=2)
squares = F.matmul(build_result_matrices(F, points).g_f_omega.T, at_beta)
print("squared shards recovered despite 2 liars:", np.array_equal(squares, (shards * shards) % F.q))
