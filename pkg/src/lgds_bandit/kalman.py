"""One-step Kalman predictor for the scalar-reward LGDS."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .matops import riccati_step


@dataclass(frozen=True, eq=False)
class KalmanState:
    """Predicted state ``z_hat`` (for the current round) and its error covariance ``p``."""

    z_hat: np.ndarray
    p: np.ndarray


def kalman_init(params, p0=None, z_hat0=None):
    """Prior predictor: ``z_hat = 0`` and ``p = sigma0`` unless overridden."""
    d = params.d
    p = params.sigma0 if p0 is None else p0
    z_hat = np.zeros(d) if z_hat0 is None else z_hat0
    return KalmanState(z_hat=np.array(z_hat, dtype=float), p=np.array(p, dtype=float))


def predict_reward(state, a):
    a = np.asarray(a, dtype=float)
    if a.shape != state.z_hat.shape:
        raise DimensionError("action dimension does not match the filter state")
    return float(a @ state.z_hat)


def kalman_update(state, a, x, params):
    """Advance the predictor after observing reward ``x`` for action ``a``.

    ``K = P a / (a^T P a + sigma2)``,
    ``z_hat' = gamma z_hat + gamma K (x - <a, z_hat>)`` and
    ``P' = riccati_step(P, a)``.
    """
    if not np.isfinite(x):
        raise InputError("observed reward must be finite")
    a = np.asarray(a, dtype=float)
    if a.shape != state.z_hat.shape:
        raise DimensionError("action dimension does not match the filter state")
    p = state.p
    pa = p @ a
    innovation_var = a @ pa + params.sigma2
    gain = pa / innovation_var
    z_hat = params.gamma @ (state.z_hat + gain * (x - a @ state.z_hat))
    p_next = riccati_step(p, a, params.gamma, params.q, params.sigma2)
    return KalmanState(z_hat=z_hat, p=p_next)
