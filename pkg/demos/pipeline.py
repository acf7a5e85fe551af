"""Simulate a five-node network, check the ten properties, then mine the goal model.

Run with ``python3 demos/pipeline.py``.
"""
from bsnassure import check_all, default_cgm, mine_cgm, run_simulation
from bsnassure.selftest import load_scenario

for name in ("nominal_5", "nodes_20"):
    trace = run_simulation(load_scenario(name))
    verdicts = check_all(trace)
    print(f"{name}: {len(trace)} snapshots over {trace.num_cycles} cycles")
    for v in verdicts:
        print(f"  {v.property_id:>3} {v.verdict.value:<9} checked={v.checked} violated={v.violated}")

    knowledge = mine_cgm(default_cgm(), trace, verdicts)
    if not knowledge.dissonances:
        print("  mined knowledge agrees with every verdict")
    for d in knowledge.dissonances:
        print(f"  dissonance at {d.node_id} on {d.property_id}: {d.region}")
    print()
