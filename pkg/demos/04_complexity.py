"""
Where the bits go
=================

Per-phase message and bit counts for one honest epoch, and how the
totals move when N and Q grow.
"""

import math

from codedchain.cli import max_feasible_K, run_point
from codedchain.netsim import Scenario, Simulator

r = Simulator(Scenario.from_dict({"N": 16, "K": 2, "Q": 4, "f": 2, "epochs": 1, "seed": 1})).run()
print(f"{'phase':28s} {'messages':>8s} {'bits':>10s}")
for phase, c in sorted(r.metrics.phases.items()):
    print(f"{phase:28s} {c['messages']:8d} {c['bits']:10d}")

# doubling Q doubles what every node sends back in prepare
for Q in (2, 4, 8):
    r = Simulator(Scenario.from_dict({"N": 16, "K": 2, "Q": Q, "f": 2, "epochs": 1, "seed": 1})).run()
    print(f"Q={Q}: prepare node->leader bits {r.metrics.phases['prepare/node->leader']['bits']}")

# growing N with K as large as feasible and the smallest usable field
prev = None
for N in (16, 32):
    base = {"N": N, "K": 1, "Q": 4, "f": N // 8, "epochs": 2, "q": "auto", "seed": 1}
    row = run_point(dict(base, K=max_feasible_K(base), _rep=0, _value=N))
    shape = N * N * 4 * math.log2(N)
    note = ""
    if prev:
        note = f"  ratio {row['bits_per_view'] / prev[0]:.2f} vs N^2 Q log N {shape / prev[1]:.2f}"
    print(f"N={N} K={row['K']} q={row['q']}: {row['bits_per_view']:.0f} bits per view, gain {row['gain']:.3f}{note}")
    prev = (row["bits_per_view"], shape)
