"""Mine dwell times, derive the dynamic policy and compare battery lifetimes.

A small battery keeps this quick; the acceptance run uses the full default.
"""
from bsnassure import ScenarioConfig, refine_and_compare
from bsnassure.config import EnergyModel

cfg = ScenarioConfig(num_sensor_nodes=3, energy=EnergyModel(battery_capacity_eu=200.0))
report = refine_and_compare(cfg, [1, 2, 3])

print("policy periods (cycles):", report["policy"]["periods_cycles"])
for arm, ms in report["mean_lifetime_ms"].items():
    oracle = report["oracle_lifetime_ms"][arm]
    print(f"  {arm:<15} {ms / 1000:10.1f} s   closed form {oracle / 1000:10.1f} s")
print(f"dynamic / non-controlled = {report['ratio']:.1f}")
print("re-verification:", report["reverification"]["status"])
