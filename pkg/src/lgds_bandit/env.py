"""Linear Gaussian dynamical system bandit environment.

The hidden state evolves as ``z_{t+1} = gamma z_t + xi_t`` with
``xi_t ~ N(0, q)``; pulling unit action ``a`` returns ``<a, z_t> + eta_t``
with ``eta_t ~ N(0, sigma2)``.

Every environment owns one random stream. Each round draws ``eta`` first
and then the ``d`` components of ``xi``; burn-in draws ``xi`` only. Because
the state does not depend on the actions taken, a whole trajectory can be
pre-drawn in one block (:func:`simulate_path`) and is bit-identical to
stepping round by round.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InputError, InstabilityError, InstanceFormatError, ParameterError
from .matops import psd_factor, solve_lyapunov, spectral_radius, symmetrize

UNIT_TOL = 1e-12
BURN_BLOCK = 64


@dataclass(frozen=True, eq=False)
class LgdsParams:
    """Full description of one bandit instance.

    Attributes
    ----------
    gamma : (d, d) ndarray
        State matrix.
    q : (d, d) ndarray
        Process-noise covariance.
    sigma2 : float
        Measurement-noise variance.
    actions : (k, d) ndarray
        One unit-norm action per row.
    sigma0 : (d, d) ndarray
        Covariance of the initial state.
    seed : int or None
        Generation seed, if the instance came from :func:`generate_instance`.
    """

    gamma: np.ndarray
    q: np.ndarray
    sigma2: float
    actions: np.ndarray
    sigma0: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float)
        d = gamma.shape[0] if gamma.ndim == 2 else -1
        if gamma.shape != (d, d):
            raise DimensionError(f"gamma must be square, got {gamma.shape}")
        q = np.array(self.q, dtype=float)
        sigma0 = np.array(self.sigma0, dtype=float)
        actions = np.atleast_2d(np.array(self.actions, dtype=float))
        if q.shape != (d, d) or sigma0.shape != (d, d):
            raise DimensionError("q and sigma0 must match gamma")
        if actions.shape[1] != d:
            raise DimensionError("actions must have d columns")
        for name, arr in (("gamma", gamma), ("q", q), ("sigma0", sigma0), ("actions", actions)):
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} has non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "sigma0", sigma0)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def d(self):
        return self.gamma.shape[0]

    @property
    def k(self):
        return self.actions.shape[0]

    def validate(self):
        """Check the modelling assumptions; raise on the first violation."""
        rho = spectral_radius(self.gamma)
        if rho >= 1.0:
            raise InstabilityError(f"spectral radius {rho:.6g} >= 1")
        if not self.sigma2 > 0:
            raise ParameterError("sigma2 must be positive")
        norms = np.linalg.norm(self.actions, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ParameterError("every action must have unit norm")
        if self.k < 2:
            raise ParameterError("at least two actions are required")
        psd_factor(self.q)
        psd_factor(self.sigma0)
        return self

    def to_dict(self):
        return {
            "d": self.d,
            "k": self.k,
            "seed": self.seed,
            "sigma2": self.sigma2,
            "gamma": self.gamma.tolist(),
            "q": self.q.tolist(),
            "actions": self.actions.tolist(),
            "sigma0": self.sigma0.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            params = cls(
                gamma=doc["gamma"],
                q=doc["q"],
                sigma2=doc["sigma2"],
                actions=doc["actions"],
                sigma0=doc["sigma0"],
                seed=doc.get("seed"),
            )
        except KeyError as exc:
            raise InstanceFormatError(f"instance document is missing key {exc}") from exc
        if "d" in doc and doc["d"] != params.d or "k" in doc and doc["k"] != params.k:
            raise InstanceFormatError("declared d/k disagree with array shapes")
        return params


def generate_instance(d, k, seed):
    """Draw a random stable instance.

    ``Q^{1/2}``, ``sigma``, the actions and a matrix ``G`` have i.i.d.
    standard normal entries; actions are normalized to unit length,
    ``gamma = 0.99 G / rho(G)``, ``q = Q^{1/2} Q^{1/2}^T``,
    ``sigma2 = sigma^2`` and ``sigma0`` is the stationary covariance.
    """
    if d < 1 or k < 2:
        raise ParameterError("need d >= 1 and k >= 2")
    rng = np.random.default_rng(seed)
    q_half = rng.standard_normal((d, d))
    sigma = 0.0
    while sigma == 0.0:
        sigma = float(rng.standard_normal())
    actions = np.empty((k, d))
    for i in range(k):
        v = rng.standard_normal(d)
        while not np.linalg.norm(v) > 0:
            v = rng.standard_normal(d)
        actions[i] = v / np.linalg.norm(v)
    rho = 0.0
    while rho == 0.0:
        g = rng.standard_normal((d, d))
        rho = spectral_radius(g)
    gamma = (0.99 / rho) * g
    q = symmetrize(q_half @ q_half.T)
    return LgdsParams(
        gamma=gamma,
        q=q,
        sigma2=sigma * sigma,
        actions=actions,
        sigma0=solve_lyapunov(gamma, q),
        seed=seed,
    )


@dataclass
class EnvState:
    """Mutable simulator state: hidden ``z``, round counter and noise stream."""

    z: np.ndarray
    t: int
    rng: np.random.Generator = field(repr=False)


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    x_star: float
    oracle_index: int
    state: EnvState


def init_state(params, seed):
    """Draw ``z_0 ~ N(0, sigma0)`` from a fresh stream seeded with ``seed``."""
    rng = np.random.default_rng(seed)
    factor = psd_factor(params.sigma0)
    z = factor @ rng.standard_normal(params.d)
    return EnvState(z=z, t=0, rng=rng)


def _noise_factor(params):
    return psd_factor(params.q)


def burn_in(state, params, iters):
    """Advance the hidden state ``iters`` times without emitting rewards.

    The round counter is reset to 0 afterwards. ``state`` is updated in
    place and returned.
    """
    if iters < 0:
        raise ParameterError("iters must be non-negative")
    if iters == 0:
        state.t = 0
        return state
    factor = _noise_factor(params)
    xi = state.rng.standard_normal((iters, params.d)) @ factor.T
    # advance in blocks: z <- G^m z + sum_j G^(m-1-j) xi_j
    block = min(iters, BURN_BLOCK)
    powers = np.empty((block + 1, params.d, params.d))
    powers[0] = np.eye(params.d)
    for i in range(1, block + 1):
        powers[i] = params.gamma @ powers[i - 1]
    z = state.z
    for start in range(0, iters, block):
        chunk = xi[start:start + block]
        m = chunk.shape[0]
        z = powers[m] @ z + np.einsum("jab,jb->a", powers[m - 1::-1], chunk)
    state.z = z
    state.t = 0
    return state


def step(state, params, action_index, factor=None):
    """Play one round.

    The reward noise is drawn after the action is fixed, then the state is
    advanced. ``state`` is updated in place.

    Returns
    -------
    StepOutcome
        ``reward``, the noise-free best mean ``x_star``, the lowest-index
        best action ``oracle_index`` and the advanced state.
    """
    if not 0 <= action_index < params.k:
        raise InputError(f"action index {action_index} out of range for k={params.k}")
    if factor is None:
        factor = _noise_factor(params)
    means = params.actions @ state.z
    oracle = int(np.argmax(means))
    eta = np.sqrt(params.sigma2) * state.rng.standard_normal()
    reward = float(means[action_index] + eta)
    xi = factor @ state.rng.standard_normal(params.d)
    state.z = params.gamma @ state.z + xi
    state.t += 1
    return StepOutcome(reward=reward, x_star=float(means[oracle]), oracle_index=oracle, state=state)


@dataclass(frozen=True)
class EnvPath:
    """Pre-drawn trajectory: ``z[t]`` is the state at round ``t``, ``eta[t]`` its reward noise."""

    z: np.ndarray
    eta: np.ndarray


def simulate_path(state, params, n):
    """Draw ``n`` rounds of states and reward noise in one block.

    Consumes the stream exactly as ``n`` calls to :func:`step` would, so the
    result matches step-by-step play for any action sequence.
    """
    d = params.d
    factor = _noise_factor(params)
    block = state.rng.standard_normal((n, d + 1))
    eta = np.sqrt(params.sigma2) * block[:, 0]
    xi = block[:, 1:] @ factor.T
    zs = np.empty((n, d))
    z = state.z
    gamma = params.gamma
    for t in range(n):
        zs[t] = z
        z = gamma @ z + xi[t]
    state.z = z
    state.t += n
    return EnvPath(z=zs, eta=eta)


def dumps_instance(params):
    """Serialize to a JSON document with full double precision."""
    return json.dumps(params.to_dict(), indent=1) + "\n"


def loads_instance(text):
    """Parse a document produced by :func:`dumps_instance`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise InstanceFormatError(
            f"line {exc.lineno}, column {exc.colno}: {exc.msg}: {context.strip()!r}"
        ) from exc
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    try:
        return LgdsParams.from_dict(doc)
    except (DimensionError, ParameterError, ValueError, TypeError) as exc:
        if isinstance(exc, InstanceFormatError):
            raise
        raise InstanceFormatError(f"invalid instance document: {exc}") from exc


def save_instance(params, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_instance(params))


def load_instance(path):
    with open(path, encoding="utf-8") as fh:
        return loads_instance(fh.read())
