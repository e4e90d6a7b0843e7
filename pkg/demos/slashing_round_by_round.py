#!/usr/bin/env python3
# Eight honest workers and two sign-flippers: watch strikes turn into slashes.

from trustfl.harness import run_scenario
from trustfl.scenarios import slashing

run = run_scenario(slashing(rounds=12))

print("round  admitted  strikes        slashed   s00 trust  s00 status")
for res in run.results:
    rep = res.report
    node = rep["nodes"]["s00"]
    print(f"{res.round_id:5d}  {len(rep['admitted']):8d}  {','.join(rep['strikes']) or '-':13s}"
          f"  {sum(rep['slashes'].values()) / 1e6:7.2f}   {node['trust_after'] / 1e6:.4f}     "
          f"{node['status_next']}")

state = run.coordinator.contract.state
print("\nremaining stake of s00:", state.stakes["s00"] / 1e6, "tokens")
print("treasury:", state.treasury / 1e6, "tokens")
print("conserved:", state.conserved())
