"""
Implicit exploration and observability
======================================

KODE never explores on purpose. Its scores for unplayed actions still move
because the innovation of the played action leaks into them through
``gamma P a``. When the played action cannot see the part of the state that
another action reads, that leak is exactly zero.
"""

import numpy as np

from lgds_bandit import (
    LgdsParams,
    compute_p_bar,
    generate_instance,
    implicit_exploration_term,
    solve_dare,
    solve_lyapunov,
    exploration_conditions,
    u_tilde,
)

# two decoupled 2-d blocks; action 0 reads block one, action 1 reads block two
gamma = np.zeros((4, 4))
gamma[:2, :2] = [[0.5, 0.2], [-0.1, 0.4]]
gamma[2:, 2:] = [[0.3, 0.0], [0.6, -0.2]]
q = np.diag([1.0, 0.5, 2.0, 1.5])
acts = np.array([[0.6, 0.8, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
params = LgdsParams(gamma=gamma, q=q, sigma2=0.7, actions=acts, sigma0=solve_lyapunov(gamma, q))

p = solve_dare(gamma, q, 0.7, acts[0])
cond = exploration_conditions(params, acts[0], acts[1], p)
print("decoupled:", cond)
omega = np.random.default_rng(0).standard_normal(5)
print("u draws:", implicit_exploration_term(acts[1], acts[0], p, gamma, 0.7, omega))

# a random instance couples everything, and u_tilde measures how strongly
for seed in range(5):
    inst = generate_instance(10, 10, seed)
    dom = compute_p_bar(inst)
    print(f"instance {seed}: log10 u_tilde = {np.log10(u_tilde(inst, dom.p_bar)):6.2f}"
          f"  P_bar inflated: {dom.inflation > 0}")
