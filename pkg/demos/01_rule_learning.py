"""Learning a symbolic world model from random play.

A rule model watches a random agent wander an empty 8x8 grid. Every observed
transition either confirms a rule, stretches one, or splits one that turned
out to be wrong. We print the accuracy as the model grows.
"""

import numpy as np

from ottalab import gridworld as gw
from ottalab import novelty as nv
from ottalab.rulemodel import RuleModel, prediction_accuracy

grid = nv.empty_config()
rng = np.random.default_rng(0)
env = gw.GridEnv(grid, rng=rng)
model = RuleModel.for_codec(gw.StateCodec(grid))

env.reset()
print("step  rules  accuracy")
for step in range(1, 3001):
    s = env.state
    a = int(rng.integers(gw.N_ACTIONS))
    s2, r, d = env.step(a)
    model.update(s, a, s2, r, d and not env.timed_out)
    if d:
        env.reset()
    if step in (10, 100, 500, 1000, 2000, 3000):
        acc = prediction_accuracy(model, gw.GridEnv(grid, seed=99), None, 1000, np.random.default_rng(1))
        print(f"{step:4d}  {len(model):5d}  {acc:.3f}")

print("\nupdate outcomes:", dict(model.stats))
fwd = model.rules_for(gw.Action.FORWARD)
print(f"FORWARD is described by {len(fwd)} rules:")
names = model.features
for rule in fwd:
    delta = {n: d for n, d in zip(names, rule.effect.delta) if d not in (None, 0)}
    print(f"  rule {rule.id}: effect {delta or 'none'}, {len(rule.boxes)} precondition box(es)")
