#!/usr/bin/env python3
# Trust scores by hand: blending metrics, idle decay and recovery after a bad spell.

from dataclasses import replace

from trustfl.trust import (MetricVector, TrustParams, TrustWeights, apply_recovery, new_state,
                           update_trust)

weights = TrustWeights()          # accuracy 0.4, consistency 0.3, quality 0.2, frequency 0.1
params = TrustParams()            # smoothing 0.5, decay 0.05 per round, recovery 0.2

# a node that contributes well for five rounds
state = new_state("alice")
good = MetricVector(accuracy=0.9, consistency=0.8, data_quality=0.85, frequency=1.0)
for r in range(1, 6):
    state = update_trust(state, good, weights, params, r)
    print(f"round {r}: trust {state.trust:.4f}")

# then goes quiet; decay is charged per idle round, never twice
for r in range(6, 16):
    state = update_trust(state, None, weights, params, r)
print(f"after 10 idle rounds: {state.trust:.4f}")

# recovery pulls trust toward the ceiling in proportion to the improvement signal
low = replace(new_state("bob"), trust=0.2)
for improvement in (0.0, 0.25, 0.5, 1.0):
    print(f"improvement {improvement:.2f} -> {apply_recovery(low, improvement, 0.2, 1.0).trust:.3f}")
