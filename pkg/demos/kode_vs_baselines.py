"""
KODE against the baselines on one instance
==========================================

Every policy faces the same pre-drawn trajectory in each repeat, so the
regret gaps are paired comparisons.
"""

import numpy as np

from lgds_bandit import generate_instance, percent_regret_decrease, run_episode
from lgds_bandit.experiments import derive_seed
from lgds_bandit.policies import POLICY_IDS

params = generate_instance(10, 10, seed=3)
roster = ["kode", "oracle", "random", "ucb", "sw-ucb", "rexp3", "oful"]
n, repeats = 1000, 3

regret = {name: [] for name in roster}
for r in range(repeats):
    env_seed = derive_seed(3, r)
    for name in roster:
        trace = run_episode(params, name, n, env_seed, derive_seed(3, POLICY_IDS[name], r),
                            burn_in_iters=10_000)
        regret[name].append(trace.cumulative_regret)

kode = np.mean(regret["kode"])
for name in roster:
    mean = np.mean(regret[name])
    line = f"{name:>7}: mean cumulative regret {mean:9.1f}"
    if name not in ("kode", "oracle"):
        line += f"   KODE decrease {percent_regret_decrease(mean, kode):6.1f}%"
    print(line)
