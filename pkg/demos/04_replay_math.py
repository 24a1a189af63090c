"""The replay machinery on small numbers.

Lambda-returns blend n-step returns; prioritized sampling draws items in
proportion to their priority; dual-objective sub-batching hands the actor
the low-error half of a batch and the critic the high-error half.
"""

import numpy as np

from ottalab import replay as rp

r, v = [0.0, 0.0, 1.0], [0.2, 0.4, 0.6, 0.0]
for lam in (0.0, 0.5, 1.0):
    print(f"lambda={lam}: returns {np.round(rp.lambda_return(r, v, 0.9, lam)[:3], 4)}")

tree = rp.SumTree(4)
for i, p in enumerate([1.0, 2.0, 3.0, 4.0]):
    tree.update(i, p)
rng = np.random.default_rng(0)
counts = np.bincount([tree.sample(u) for u in rng.random(20_000) * tree.total], minlength=4)
print("sum-tree draw shares", np.round(counts / counts.sum(), 3), "expected [0.1 0.2 0.3 0.4]")

deltas = [5, 0.1, 3, 2, 0.2, 4]
for w in (0.0, 0.5, 1.0):
    actor, critic = rp.dops_subsample(deltas, w)
    print(f"overlap W={w}: actor {actor.tolist()} critic {critic.tolist()}")

print("throughput", {k: round(v) for k, v in rp.bench(2_000, 5_000, 32).items() if k.endswith("_per_s")})
