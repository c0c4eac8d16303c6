"""
Consensus under attack
======================

Runs the bundled scenarios through the simulator and reports, for each,
whether every epoch committed, whether the result agreed with the uncoded
oracle, and how honest nodes reacted to Byzantine leaders.
"""

from importlib import resources

from codedchain.netsim import Scenario, Simulator

names = ["honest", "wrong_results", "nonhomology", "discrepancy", "equivocation",
         "flipped_indicator", "crash", "liveness_gst", "invalid_tx"]

for name in names:
    sc = Scenario.load(resources.files("codedchain") / "scenarios" / f"{name}.json")
    r = Simulator(sc).run()
    s = r.metrics.summary
    print(f"{name:18s} epochs {r.committed}/{sc.epochs}  views {s['commit_views']}  "
          f"safety {s['safety_ok']}  oracle {s['oracle_ok']}")
    for a in r.metrics.attacks:
        print(f"{'':18s} view {a['view']} led by {a['leader']}: "
              f"{'rejected' if a['rejected'] else 'committed'} {a['honest_notes']}")

# the invalid transaction costs exactly K transactions in its epoch
sc = Scenario.load(resources.files("codedchain") / "scenarios" / "invalid_tx.json")
e = Simulator(sc).run().metrics.epochs[0]
print(f"\ninvalid_tx epoch 1: {len(e.confirmed)} confirmed, invalid {e.invalid}, collateral {e.collateral}")
