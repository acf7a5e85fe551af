"""Inject one fault per response property and watch the verifier catch it."""
from bsnassure import check_property, run_simulation
from bsnassure.mutations import mutate_for
from bsnassure.selftest import load_scenario

trace = run_simulation(load_scenario("nominal_5"))
for pid in ("P2", "P3", "P7", "P8", "P10"):
    before = check_property(trace, pid).verdict.value
    mutated, index = mutate_for(trace, pid)
    after = check_property(mutated, pid)
    print(f"{pid}: {before} -> {after.verdict.value} (mutated snapshot {index})")
    if after.witness:
        print(f"     witness: {after.witness[1]}")
