"""KODE, the oracle and the baseline bandit policies.

Every policy exposes ``select(t, z) -> PolicyDecision`` and
``observe(t, decision, reward)``. ``t`` is the zero-based round index and
``z`` the true hidden state, which only :class:`Oracle` reads. Score-based
policies break ties toward the lowest action index.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError
from .kalman import kalman_init, kalman_update
from .matops import solve_lyapunov


@dataclass(frozen=True, eq=False)
class PolicyDecision:
    action_index: int
    scores: np.ndarray


def _argmax(scores):
    # np.argmax already returns the first maximal index
    return int(np.argmax(scores))


def kode_select(kstate, actions):
    """Pick the action best aligned with the predicted state."""
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    if actions.shape[0] == 0:
        raise InputError("empty action set")
    scores = actions @ kstate.z_hat
    return PolicyDecision(_argmax(scores), scores)


def kode_observe(kstate, decision, reward, params):
    return kalman_update(kstate, params.actions[decision.action_index], reward, params)


def oracle_select(z, actions):
    """Pick the action best aligned with the true state."""
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    scores = actions @ np.asarray(z, dtype=float)
    return PolicyDecision(_argmax(scores), scores)


def random_select(k, rng):
    idx = int(rng.integers(k))
    return PolicyDecision(idx, np.full(k, 1.0 / k))


def reward_statistics(params, z_cov=None):
    """Return ``(trace(Z), lambda_max(Z))`` of the stationary state covariance."""
    if z_cov is None:
        z_cov = solve_lyapunov(params.gamma, params.q)
    return float(np.trace(z_cov)), float(np.linalg.eigvalsh(z_cov)[-1])


class Policy:
    """Common interface. Subclasses set ``name`` and override the hooks."""

    name = "policy"
    defaults = {}

    def __init__(self, params, n, rng, **hyper):
        unknown = set(hyper) - set(self.defaults)
        if unknown:
            raise ParameterError(f"{self.name}: unknown hyperparameters {sorted(unknown)}")
        self.params = params
        self.n = n
        self.rng = rng
        self.k = params.k

    def hyperparameters(self):
        return {}

    def select(self, t, z=None):
        raise NotImplementedError

    def observe(self, t, decision, reward):
        pass


class KODE(Policy):
    """Exploration-free policy acting greedily on the Kalman prediction."""

    name = "kode"

    def __init__(self, params, n, rng, **hyper):
        super().__init__(params, n, rng, **hyper)
        self.kstate = kalman_init(params)

    def select(self, t, z=None):
        return kode_select(self.kstate, self.params.actions)

    def observe(self, t, decision, reward):
        self.kstate = kode_observe(self.kstate, decision, reward, self.params)


class Oracle(Policy):
    name = "oracle"

    def select(self, t, z=None):
        if z is None:
            raise InputError("the oracle needs the true state")
        return oracle_select(z, self.params.actions)


class RandomPolicy(Policy):
    name = "random"

    def select(self, t, z=None):
        return random_select(self.k, self.rng)


class UCB(Policy):
    """UCB1 with width ``c * sqrt(2 ln t / n_i)``.

    ``c`` defaults to the stationary reward scale ``sqrt(sigma2 + tr(Z)/d)``.
    """

    name = "ucb"
    defaults = {"c": None}

    def __init__(self, params, n, rng, z_cov=None, **hyper):
        super().__init__(params, n, rng, **hyper)
        c = hyper.get("c")
        if c is None:
            tr_z, _ = reward_statistics(params, z_cov)
            c = math.sqrt(params.sigma2 + tr_z / params.d)
        self.c = float(c)
        self.counts = np.zeros(self.k)
        self.sums = np.zeros(self.k)

    def hyperparameters(self):
        return {"c": self.c}

    def _scores(self, counts, sums, log_term):
        scores = np.full(self.k, np.inf)
        played = counts > 0
        scores[played] = sums[played] / counts[played] + self.c * np.sqrt(2.0 * log_term / counts[played])
        return scores

    def select(self, t, z=None):
        scores = self._scores(self.counts, self.sums, math.log(t + 1))
        return PolicyDecision(_argmax(scores), scores)

    def observe(self, t, decision, reward):
        self.counts[decision.action_index] += 1
        self.sums[decision.action_index] += reward

    @property
    def means(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.sums / self.counts


class SlidingWindowUCB(UCB):
    """UCB over the last ``window`` rounds only.

    Width is ``c * sqrt(2 ln min(t, window) / N_i)`` with ``N_i`` the plays
    of arm ``i`` inside the window; arms absent from the window are forced.
    """

    name = "sw-ucb"
    defaults = {"c": None, "window": 100}

    def __init__(self, params, n, rng, z_cov=None, **hyper):
        super().__init__(params, n, rng, z_cov=z_cov, **hyper)
        self.window = int(hyper.get("window", 100))
        if self.window < 1:
            raise ParameterError("window must be at least 1")
        self._arms = np.zeros(self.window, dtype=int)
        self._rewards = np.zeros(self.window)
        self._filled = 0
        self._pos = 0

    def hyperparameters(self):
        return {"c": self.c, "window": self.window}

    def window_stats(self):
        arms = self._arms[: self._filled]
        rewards = self._rewards[: self._filled]
        counts = np.bincount(arms, minlength=self.k).astype(float)
        sums = np.bincount(arms, weights=rewards, minlength=self.k)
        return counts, sums

    def select(self, t, z=None):
        counts, sums = self.window_stats()
        scores = self._scores(counts, sums, math.log(min(t + 1, self.window)))
        return PolicyDecision(_argmax(scores), scores)

    def observe(self, t, decision, reward):
        self._arms[self._pos] = decision.action_index
        self._rewards[self._pos] = reward
        self._pos = (self._pos + 1) % self.window
        self._filled = min(self._filled + 1, self.window)


class Rexp3(Policy):
    """Exp3 restarted every ``batch`` rounds.

    Rewards are mapped to ``[0, 1]`` by ``clip(0.5 + x / (2 B))`` with
    ``B = clip_sigmas * sqrt(sigma2 + lambda_max(Z))``. The exploration rate
    is ``min(1, sqrt(k ln k / ((e - 1) batch)))`` and ``batch`` defaults to
    ``ceil((k ln k)^(1/3) n^(2/3))``.
    """

    name = "rexp3"
    defaults = {"batch": None, "clip_sigmas": 3.0, "gamma": None}

    def __init__(self, params, n, rng, z_cov=None, **hyper):
        super().__init__(params, n, rng, **hyper)
        k = self.k
        klogk = k * math.log(k)
        batch = hyper.get("batch")
        if batch is None:
            batch = max(1, math.ceil(klogk ** (1.0 / 3.0) * n ** (2.0 / 3.0)))
        self.batch = int(batch)
        rate = hyper.get("gamma")
        if rate is None:
            rate = min(1.0, math.sqrt(klogk / ((math.e - 1.0) * self.batch)))
        self.gamma = float(rate)
        self.clip_sigmas = float(hyper.get("clip_sigmas", 3.0))
        _, lmax = reward_statistics(params, z_cov)
        self.bound = self.clip_sigmas * math.sqrt(params.sigma2 + lmax)
        self.log_w = np.zeros(k)

    def hyperparameters(self):
        return {"batch": self.batch, "gamma": self.gamma, "clip_sigmas": self.clip_sigmas}

    def probabilities(self):
        w = np.exp(self.log_w - self.log_w.max())
        return (1.0 - self.gamma) * w / w.sum() + self.gamma / self.k

    def select(self, t, z=None):
        if t % self.batch == 0:
            self.log_w[:] = 0.0
        p = self.probabilities()
        u = self.rng.random()
        idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
        return PolicyDecision(min(idx, self.k - 1), p)

    def observe(self, t, decision, reward):
        i = decision.action_index
        x = min(1.0, max(0.0, 0.5 + reward / (2.0 * self.bound)))
        self.log_w[i] += self.gamma * (x / decision.scores[i]) / self.k


class OFUL(Policy):
    """Optimistic ridge-regression linear bandit.

    Score ``<a, theta_hat> + beta_t ||a||_{V^-1}`` with
    ``beta_t = sigma_eff sqrt(d ln((1 + t / lam) / delta)) + sqrt(lam) S``.
    Defaults: ``sigma_eff = sqrt(sigma2 + tr(Z))`` and ``S = sqrt(tr(Z))``.
    """

    name = "oful"
    defaults = {"lam": 1.0, "delta": 0.01, "sigma_eff": None, "s_bound": None, "beta_scale": 1.0}

    def __init__(self, params, n, rng, z_cov=None, **hyper):
        super().__init__(params, n, rng, **hyper)
        self.lam = float(hyper.get("lam", 1.0))
        self.delta = float(hyper.get("delta", 0.01))
        self.beta_scale = float(hyper.get("beta_scale", 1.0))
        sigma_eff, s_bound = hyper.get("sigma_eff"), hyper.get("s_bound")
        if sigma_eff is None or s_bound is None:
            tr_z, _ = reward_statistics(params, z_cov)
            if sigma_eff is None:
                sigma_eff = math.sqrt(params.sigma2 + tr_z)
            if s_bound is None:
                s_bound = math.sqrt(tr_z)
        self.sigma_eff = float(sigma_eff)
        self.s_bound = float(s_bound)
        d = params.d
        self.v_inv = np.eye(d) / self.lam
        self.b = np.zeros(d)
        self.n_obs = 0

    def hyperparameters(self):
        return {
            "lam": self.lam,
            "delta": self.delta,
            "sigma_eff": self.sigma_eff,
            "s_bound": self.s_bound,
            "beta_scale": self.beta_scale,
        }

    def beta(self):
        d = self.params.d
        radius = self.sigma_eff * math.sqrt(d * math.log((1.0 + self.n_obs / self.lam) / self.delta))
        return self.beta_scale * (radius + math.sqrt(self.lam) * self.s_bound)

    def select(self, t, z=None):
        acts = self.params.actions
        theta = self.v_inv @ self.b
        av = acts @ self.v_inv
        widths = np.sqrt(np.maximum(np.einsum("ij,ij->i", av, acts), 0.0))
        scores = acts @ theta + self.beta() * widths
        return PolicyDecision(_argmax(scores), scores)

    def observe(self, t, decision, reward):
        a = self.params.actions[decision.action_index]
        va = self.v_inv @ a
        self.v_inv = self.v_inv - np.outer(va, va) / (1.0 + a @ va)
        self.b = self.b + reward * a
        self.n_obs += 1


POLICIES = {
    cls.name: cls for cls in (KODE, Oracle, RandomPolicy, UCB, SlidingWindowUCB, Rexp3, OFUL)
}

# stable identifiers used for seed derivation; never renumber
POLICY_IDS = {"kode": 1, "oracle": 2, "random": 3, "ucb": 4, "sw-ucb": 5, "rexp3": 6, "oful": 7}


def make_policy(name, params, n, seed, z_cov=None, **hyper):
    """Build a fresh policy instance by roster name."""
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ParameterError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    rng = np.random.default_rng(seed)
    if cls in (UCB, SlidingWindowUCB, Rexp3, OFUL):
        return cls(params, n, rng, z_cov=z_cov, **hyper)
    return cls(params, n, rng, **hyper)
