"""
A scalar walk-through
=====================

One hidden coordinate, two opposite actions. Small enough to check every
number by hand.
"""

import math

import numpy as np

from lgds_bandit import (
    LgdsParams,
    compute_p_bar,
    kalman_init,
    kalman_update,
    regret_bound,
    solve_dare,
    solve_lyapunov,
    steady_angle_bound,
)

# z' = 0.9 z + xi, reward = a z + eta, unit noise everywhere
params = LgdsParams(gamma=[[0.9]], q=[[1.0]], sigma2=1.0, actions=[[1.0], [-1.0]],
                    sigma0=solve_lyapunov([[0.9]], [[1.0]]))
print("stationary variance Z =", params.sigma0[0, 0], "(closed form 1/0.19 =", 1 / 0.19, ")")

# one filter step from a unit prior with observed reward 2
state = kalman_init(params, p0=[[1.0]])
state = kalman_update(state, [1.0], 2.0, params)
print("after one update: z_hat =", state.z_hat[0], " P =", state.p[0, 0])

# the steady-state error variance solves p^2 - 0.81 p - 1 = 0
p_inf = solve_dare([[0.9]], [[1.0]], 1.0, [1.0])[0, 0]
print("DARE:", p_inf, " quadratic root:", (0.81 + math.sqrt(0.81**2 + 4)) / 2)

# per-round regret bound: sqrt(2 * 4 * p / pi)
p_bar = compute_p_bar(params).p_bar
print("regret bound per round:", regret_bound(p_bar, params.actions, 1))

# steady-state angle bound at the median of the chi-square tail
nu, theta = steady_angle_bound(params, alpha=0.5, mc_samples=10**6, seed=0)
print(f"nu = {nu:.4f}, theta_S = {theta:.4f} rad (cap pi/4 = {math.pi / 4:.4f})")

# run the filter on a long trajectory and watch P settle
rng = np.random.default_rng(0)
z, state = 0.0, kalman_init(params)
for t in range(30):
    x = z + rng.standard_normal()
    state = kalman_update(state, [1.0], x, params)
    z = 0.9 * z + rng.standard_normal()
print("P after 30 rounds:", state.p[0, 0])
