#!/usr/bin/env python3
# Same attacked roster three ways: full policy, attack-free baseline, and no defences.

import numpy as np

from trustfl.harness import run_scenario
from trustfl.scenarios import ablated, attack_free, attacked

curves = {}
for make in (attacked, attack_free, ablated):
    run = run_scenario(make())
    curves[make.__name__] = np.array([s["validation_loss"] for s in run.summaries])

for name, loss in curves.items():
    print(f"{name:12s} start {loss[0]:.3e}  round 10 {loss[10]:.3e}  final {loss[-1]:.3e}")

print("\nattacked / attack-free:", curves["attacked"][-1] / curves["attack_free"][-1])
print("no-defence / attacked:  ", curves["ablated"][-1] / curves["attacked"][-1])
