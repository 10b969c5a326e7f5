"""Measure abandoned base blocks under the fork amplifier and freeze the result.

    python tools/record_baseline.py tests/fixtures/fork_amplifier_baseline.json
"""

import json
import sys

from closuresim.config import ExperimentConfig
from closuresim.engine import simulate
from closuresim.metrics import abandoned_blocks

CONFIG = dict(n=10, f=3, q=0.05, rounds=2000, k=6, adversary="fork_amplifier")
SEEDS = range(1, 101)


def measure() -> dict:
    c = ExperimentConfig(**CONFIG)
    counts = {}
    for seed in SEEDS:
        t = simulate(c, seed, "off", record_receives=False)
        counts[str(seed)] = len(abandoned_blocks(t))
    return {"config": CONFIG, "abandoned_per_seed": counts}


if __name__ == "__main__":
    out = measure()
    text = json.dumps(out, indent=1, sort_keys=True) + "\n"
    if len(sys.argv) > 1:
        open(sys.argv[1], "w").write(text)
    else:
        sys.stdout.write(text)
