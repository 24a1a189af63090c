"""A small paired adaptation experiment.

Both arms share pre-training on the two-key DoorKey grid. After the yellow
door starts demanding the blue key, the baseline learns from real steps only
while the imagination arm also trains on rollouts from its repaired rule
model. Takes a few minutes; logs and metrics go to a temporary directory.
"""

import json
import tempfile
from pathlib import Path

from ottalab import harness as hs

config = hs.ExperimentConfig(novelty="DoorKeyChange", seeds=[3], post_budget=200_000)
out = Path(tempfile.mkdtemp(prefix="ottalab-demo-"))
paths = hs.run(config, out)
metrics = hs.compute_metrics(paths, n_boot=200)

for arm, entry in metrics["metrics"][config.novelty].items():
    seed = entry["seeds"]["3"]
    print(f"{arm:12s} " + "  ".join(f"{k}={v if isinstance(v, str) else round(v, 3)}" for k, v in seed.items()))
print("\nlogs in", out)
print(json.dumps(json.loads((out / f"{config.novelty}__manifest.json").read_text())["arm_diff"]))
