"""Analytical performance quantities for KODE.

Covers the linear regret bound, the online and steady-state angle bounds,
the implicit exploration term with its observability conditions, and the
``u_tilde`` observability metric. Bounds that exceed their validity cap of
``pi/4`` are returned as ``None``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParameterError
from .matops import (
    observability_decompose,
    psd_dominates,
    quadratic_form_quantile,
    solve_dare,
    solve_lyapunov,
)

ANGLE_CAP = math.pi / 4
# slack so that the exact boundary survives rounding
_CAP_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class DominantCovariance:
    """Covariance dominating every per-action steady-state covariance.

    ``inflation`` is 0 when the largest-trace DARE solution already
    dominates the others; otherwise it is the ``mu`` added as ``mu * I``.
    """

    p_bar: np.ndarray
    dominance_ok: bool
    inflation: float
    argmax_index: int
    per_action: tuple

    @property
    def genuine(self):
        return self.inflation == 0.0


@dataclass(frozen=True, eq=False)
class BoundReport:
    p_bar: np.ndarray
    dominance_ok: bool
    inflation: float
    regret_bound_per_round: float
    regret_bound_n: float
    n: int
    z_lyapunov: np.ndarray
    nu: float
    alpha: float
    theta_s: float | None
    u_tilde: float
    extras: dict = field(default_factory=dict)


def compute_p_bar(params, tol=1e-10, max_iter=10**6, dom_tol=1e-8):
    """Steady-state covariances ``P_a`` for every action and a dominating ``P_bar``.

    The candidate is the ``P_a`` of largest trace. If it fails to dominate
    some ``P_a`` (beyond ``dom_tol``) it is inflated by ``mu I`` with
    ``mu = max_a lambda_max(P_a - candidate)``.
    """
    per_action = tuple(
        solve_dare(params.gamma, params.q, params.sigma2, a, tol=tol, max_iter=max_iter)
        for a in params.actions
    )
    j = int(np.argmax([np.trace(p) for p in per_action]))
    cand = per_action[j]
    if all(psd_dominates(cand, p, dom_tol) for p in per_action):
        return DominantCovariance(cand, True, 0.0, j, per_action)
    mu = max(float(np.linalg.eigvalsh(p - cand)[-1]) for p in per_action)
    p_bar = cand + mu * np.eye(params.d)
    return DominantCovariance(p_bar, True, mu, j, per_action)


def regret_bound(p_bar, actions, n):
    """``n * max_{a, a'} sqrt(2 (a - a')^T P_bar (a - a') / pi)``."""
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    diff = actions[:, None, :] - actions[None, :, :]
    quad = np.einsum("ijk,kl,ijl->ij", diff, np.asarray(p_bar, dtype=float), diff)
    return n * math.sqrt(2.0 * max(float(quad.max()), 0.0) / math.pi)


def angle(z, z_hat):
    """Angle in ``[0, pi]`` between two non-zero vectors."""
    z = np.asarray(z, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    nz, nh = np.linalg.norm(z), np.linalg.norm(z_hat)
    if nz == 0 or nh == 0:
        raise InputError("angle undefined for a zero vector")
    return math.acos(min(1.0, max(-1.0, float(z @ z_hat) / (nz * nh))))


def _half_arccos_bound(num, tr_p):
    arg = 2.0 * num / (num + tr_p) - 1.0
    return 0.5 * math.acos(min(1.0, max(-1.0, arg)))


def _capped(val):
    if val <= ANGLE_CAP * (1.0 + _CAP_RTOL):
        return min(val, ANGLE_CAP)
    return None


def online_angle_bound(z_hat, p):
    """Bound on the expected angle between the state and its prediction.

    ``0.5 * arccos(2 |z_hat|^2 / (|z_hat|^2 + tr P) - 1)``, or ``None`` when
    the value exceeds ``pi/4``.
    """
    z_hat = np.asarray(z_hat, dtype=float)
    sq = float(z_hat @ z_hat)
    tr_p = float(np.trace(p))
    if sq == 0 and tr_p == 0:
        raise InputError("bound undefined when both |z_hat| and tr(P) vanish")
    return _capped(_half_arccos_bound(sq, tr_p))


def steady_angle_bound(params, alpha=0.95, mc_samples=10**5, seed=0, p_bar=None, z_cov=None):
    """Return ``(nu, theta_s)`` for the steady-state angle bound.

    ``nu`` is the level exceeded with probability ``alpha`` by
    ``w^T (Z - P_bar) w``; ``theta_s`` is ``None`` when ``nu <= 0`` or the
    bound exceeds ``pi/4``.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha must lie in (0, 1)")
    if p_bar is None:
        p_bar = compute_p_bar(params).p_bar
    if z_cov is None:
        z_cov = solve_lyapunov(params.gamma, params.q)
    nu = quadratic_form_quantile(z_cov - p_bar, alpha, mc_samples, seed)
    if nu <= 0:
        return nu, None
    return nu, _capped(_half_arccos_bound(nu, float(np.trace(p_bar))))


def implicit_exploration_term(a_next, a_chosen, p, gamma, sigma2, omega):
    """Innovation-driven perturbation of the score of ``a_next`` after playing ``a_chosen``.

    ``a_next^T gamma P a_chosen / sqrt(a_chosen^T P a_chosen + sigma2) * omega``;
    ``omega`` may be an array of standard-normal draws.
    """
    a_next = np.asarray(a_next, dtype=float)
    a_chosen = np.asarray(a_chosen, dtype=float)
    p = np.asarray(p, dtype=float)
    coef = (a_next @ np.asarray(gamma, dtype=float) @ p @ a_chosen) / math.sqrt(
        a_chosen @ p @ a_chosen + sigma2
    )
    return coef * np.asarray(omega, dtype=float)


def u_tilde(params, p_bar):
    """Largest variance of the implicit exploration term over ordered action pairs.

    ``max_{i != j} (a_i^T gamma P a_j)^2 / (a_j^T P a_j + sigma2)``.
    """
    acts = params.actions
    k = acts.shape[0]
    if k < 2:
        raise InputError("u_tilde needs at least two actions")
    p_bar = np.asarray(p_bar, dtype=float)
    cross = acts @ params.gamma @ p_bar @ acts.T
    denom = np.einsum("ij,jk,ik->i", acts, p_bar, acts) + params.sigma2
    var = cross**2 / denom[None, :]
    np.fill_diagonal(var, -np.inf)
    return float(var.max())


@dataclass(frozen=True)
class ExplorationConditions:
    """Observability coupling between a played action and another action.

    ``shared_observable``: the other action has a component in the
    subspace observed by the played action, or that subspace drives the
    rest of the state. ``error_correlated``: ``|a_tilde^T P a| > tol``.
    ``structurally_zero``: ``|a_tilde^T gamma P a| <= tol``.
    """

    shared_observable: bool
    error_correlated: bool
    structurally_zero: bool
    obs_dim: int
    coupling: float
    error_covariance: float
    prediction_error_correlation: float


def exploration_conditions(params, a, a_tilde, p, tol=1e-10):
    """Evaluate the observability conditions for the pair ``(a, a_tilde)``."""
    a = np.asarray(a, dtype=float)
    a_tilde = np.asarray(a_tilde, dtype=float)
    p = np.asarray(p, dtype=float)
    dec = observability_decompose(params.gamma, a)
    at_o, _ = dec.split(a_tilde)
    uprime = dec.gamma_uprime
    shared = bool(
        (at_o.size and np.max(np.abs(at_o)) > tol) or (uprime.size and np.max(np.abs(uprime)) > tol)
    )
    err_cov = float(a_tilde @ p @ a)
    coupling = float(a_tilde @ params.gamma @ p @ a)
    return ExplorationConditions(
        shared_observable=shared,
        error_correlated=abs(err_cov) > tol,
        structurally_zero=abs(coupling) <= tol,
        obs_dim=dec.obs_dim,
        coupling=coupling,
        error_covariance=err_cov,
        prediction_error_correlation=err_cov + params.sigma2,
    )


# name used by the public contract
theorem4_conditions = exploration_conditions


def bound_report(params, n=1000, alpha=0.95, mc_samples=10**5, seed=0, dominant=None, z_cov=None):
    """Compute every bound for one instance."""
    if dominant is None:
        dominant = compute_p_bar(params)
    if z_cov is None:
        z_cov = solve_lyapunov(params.gamma, params.q)
    per_round = regret_bound(dominant.p_bar, params.actions, 1)
    nu, theta_s = steady_angle_bound(
        params, alpha, mc_samples, seed, p_bar=dominant.p_bar, z_cov=z_cov
    )
    return BoundReport(
        p_bar=dominant.p_bar,
        dominance_ok=dominant.dominance_ok,
        inflation=dominant.inflation,
        regret_bound_per_round=per_round,
        regret_bound_n=n * per_round,
        n=n,
        z_lyapunov=z_cov,
        nu=nu,
        alpha=alpha,
        theta_s=theta_s,
        u_tilde=u_tilde(params, dominant.p_bar),
        extras={"argmax_index": dominant.argmax_index},
    )
