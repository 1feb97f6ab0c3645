"""Which designer wins? It depends on the chain.

The common period wins on the two-function reference chain, but that is not
a rule. This script draws random chains and counts wins.
"""

import numpy as np

from chainplan import optimize_period, plan_chain, solve_linear
from chainplan.sampling import random_chain

rng = np.random.default_rng(2024)
wins = {"linear": 0, "common-period": 0}
gaps = []
for _ in range(300):
    spec = random_chain(rng)
    lin = plan_chain(spec, "linear").cost
    cp = plan_chain(spec, "common-period").cost
    wins["linear" if lin.total < cp.total else "common-period"] += 1
    gaps.append((lin.total - cp.total) / lin.lower_bound)

print("wins over 300 random chains:", wins)
gaps = np.array(gaps)
print(f"(linear - common) / lower bound: median {np.median(gaps):+.4f}, "
      f"range [{gaps.min():+.4f}, {gaps.max():+.4f}]")

# Tight deadlines push both designs toward keeping machines on.
spec = random_chain(np.random.default_rng(7))
print("\none chain, shrinking the deadline")
for D in (0.2, 0.05, 0.01, 0.002):
    s = spec.with_deadline(D)
    d = optimize_period(s)
    print(f"  D = {D * 1e3:6.1f} ms: T* = {d.period * 1e3:8.3f} ms, "
          f"common {d.cost.total:9.4f}, linear {solve_linear(s).cost.total:9.4f}")
