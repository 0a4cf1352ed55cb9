"""Small dense-matrix kernels: Riccati and Lyapunov solvers, observability
tools, PSD ordering and quadratic-form quantiles.

All routines take and return plain ``numpy`` arrays and are free of side
effects, so they may be called concurrently.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .errors import (
    ConvergenceError,
    DimensionError,
    InputError,
    InstabilityError,
    NumericError,
    ParameterError,
)

RANK_TOL = 1e-10


def _square(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def symmetrize(m):
    """Return ``(m + m.T) / 2``."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def spectral_radius(m):
    """Largest eigenvalue modulus of a square matrix."""
    m = _square(m)
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    if m.size == 0:
        return 0.0
    try:
        eig = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.max(np.abs(eig)))


def psd_factor(m, tol=1e-10):
    """Return ``L`` with ``L @ L.T == m`` for a symmetric PSD ``m``.

    Cholesky is tried first; singular matrices fall back to a clipped
    eigen-factor. Raises ``ParameterError`` when ``m`` has an eigenvalue
    below ``-tol * max(1, ||m||)``.
    """
    m = symmetrize(_square(m))
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(m)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    if w.size and w.min() < -tol * scale:
        raise ParameterError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def solve_lyapunov(gamma, q):
    """Solve ``Z = gamma Z gamma^T + q`` for a stable ``gamma``.

    Parameters
    ----------
    gamma : (d, d) array_like
        State matrix with spectral radius below one.
    q : (d, d) array_like
        Symmetric PSD process-noise covariance.

    Returns
    -------
    Z : (d, d) ndarray
        Symmetric steady-state covariance.
    """
    gamma = _square(gamma, "gamma")
    q = _square(q, "q")
    if q.shape != gamma.shape:
        raise DimensionError("gamma and q must have the same shape")
    rho = spectral_radius(gamma)
    if rho >= 1.0:
        raise InstabilityError(f"spectral radius {rho:.6g} >= 1")
    z = symmetrize(solve_discrete_lyapunov(gamma, q))
    # a few fixed-point sweeps remove the solver's residual at no risk
    for _ in range(3):
        z = symmetrize(gamma @ z @ gamma.T + q)
    return z


def riccati_step(p, a, gamma, q, sigma2):
    """One step of the prediction-error Riccati recursion.

    Returns ``gamma P gamma^T + q - gamma P a (a^T P a + sigma2)^{-1} a^T P gamma^T``
    symmetrized.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if p.shape != gamma.shape or a.shape != (gamma.shape[0],) or np.shape(q) != gamma.shape:
        raise DimensionError("riccati_step: inconsistent dimensions")
    gp = gamma @ p
    gpa = gp @ a
    s = a @ p @ a + sigma2
    out = gp @ gamma.T + q - np.outer(gpa, gpa) / s
    return symmetrize(out)


def solve_dare(gamma, q, sigma2, a, tol=1e-10, max_iter=10**6):
    """Steady-state prediction-error covariance for a fixed action.

    Iterates :func:`riccati_step` from ``P = q`` until the Frobenius norm of
    the update is at most ``tol``.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` iterations pass without meeting ``tol``.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    gamma = _square(gamma, "gamma")
    q = symmetrize(_square(q, "q"))
    a = np.asarray(a, dtype=float)
    p = q.copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        nxt = riccati_step(p, a, gamma, q, sigma2)
        residual = float(np.linalg.norm(nxt - p))
        p = nxt
        if residual <= tol:
            return p
    raise ConvergenceError("DARE iteration did not converge", residual, max_iter)


def observability_gramian(gamma, actions, t0, t1):
    """Observability Gramian ``sum_{tau=t0}^{t1} (gamma^T)^tau a_tau a_tau^T gamma^tau``.

    ``actions`` is indexed by round: ``actions[tau]`` must exist for every
    ``tau`` in ``[t0, t1]`` (a sequence, array with one row per round, or a
    mapping).
    """
    gamma = _square(gamma, "gamma")
    if t0 > t1:
        raise InputError("t0 must not exceed t1")
    d = gamma.shape[0]
    out = np.zeros((d, d))
    power = np.linalg.matrix_power(gamma, t0)
    for tau in range(t0, t1 + 1):
        try:
            a = np.asarray(actions[tau], dtype=float)
        except (IndexError, KeyError) as exc:
            raise InputError(f"no action supplied for tau={tau}") from exc
        if a.shape != (d,):
            raise DimensionError(f"action at tau={tau} has shape {a.shape}")
        row = a @ power
        out += np.outer(row, row)
        power = power @ gamma
    return symmetrize(out)


@dataclass(frozen=True)
class ObservabilityDecomposition:
    """Orthogonal change of coordinates splitting observable/unobservable parts.

    With ``T = transform``, ``T.T @ gamma @ T`` equals
    ``[[gamma_o, 0], [gamma_uprime, gamma_u]]`` and ``T.T @ a == [a_o, 0]``.
    """

    transform: np.ndarray
    obs_dim: int
    gamma_o: np.ndarray
    gamma_uprime: np.ndarray
    gamma_u: np.ndarray
    a_o: np.ndarray

    def split(self, v):
        """Return ``(v_O, v_U)`` of ``T^T v``."""
        w = self.transform.T @ np.asarray(v, dtype=float)
        return w[: self.obs_dim], w[self.obs_dim:]

    def transform_covariance(self, p):
        """Return ``(P_O, Phi, P_U)`` blocks of ``T^T P T``."""
        m = self.transform.T @ np.asarray(p, dtype=float) @ self.transform
        r = self.obs_dim
        return m[:r, :r], m[:r, r:], m[r:, r:]


def observability_decompose(gamma, a, tol=RANK_TOL):
    """Split the state space into the part observed through ``a`` and the rest.

    The observable subspace is the smallest ``gamma^T``-invariant subspace
    containing ``a``; it is built by Arnoldi-style orthonormalization of
    ``a, gamma^T a, ...`` and completed to an orthogonal basis.
    """
    gamma = _square(gamma, "gamma")
    a = np.asarray(a, dtype=float)
    d = gamma.shape[0]
    if a.shape != (d,):
        raise DimensionError("action dimension does not match gamma")
    norm = np.linalg.norm(a)
    if abs(norm - 1.0) > 1e-8:
        raise ParameterError(f"action must have unit norm, got {norm:.6g}")

    scale = max(1.0, np.linalg.norm(gamma, 2))
    basis = [a / norm]
    while len(basis) < d:
        w = gamma.T @ basis[-1]
        for _ in range(2):
            for b in basis:
                w = w - (b @ w) * b
        wn = np.linalg.norm(w)
        if wn <= tol * scale:
            break
        basis.append(w / wn)
    q_o = np.column_stack(basis)
    r = q_o.shape[1]
    if r < d:
        # orthogonal complement from the full QR of the observable basis
        full, _ = np.linalg.qr(q_o, mode="complete")
        t = np.column_stack([q_o, full[:, r:]])
    else:
        t = q_o
    g = t.T @ gamma @ t
    return ObservabilityDecomposition(
        transform=t,
        obs_dim=r,
        gamma_o=g[:r, :r],
        gamma_uprime=g[r:, :r],
        gamma_u=g[r:, r:],
        a_o=(t.T @ a)[:r],
    )


def quadratic_form_quantile(s, alpha, samples=10**5, seed=0, chunk=1 << 16):
    """Threshold ``nu`` with ``P(w^T s w >= nu) = alpha`` for ``w ~ N(0, I)``.

    Estimated as the empirical ``(1 - alpha)``-quantile of ``samples``
    seeded draws. Draws are taken in the eigenbasis of ``s``, which leaves
    the distribution of the quadratic form unchanged.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha must lie in (0, 1)")
    if samples < 10**4:
        raise ParameterError("samples must be at least 1e4")
    s = symmetrize(_square(s, "s"))
    lam = np.linalg.eigvalsh(s)
    rng = np.random.default_rng(seed)
    vals = np.empty(samples)
    for start in range(0, samples, chunk):
        stop = min(start + chunk, samples)
        w = rng.standard_normal((stop - start, lam.size))
        vals[start:stop] = (w * w) @ lam
    return float(np.quantile(vals, 1.0 - alpha))


def psd_dominates(p_hi, p_lo, tol=1e-8):
    """True iff ``p_hi - p_lo`` has no eigenvalue below ``-tol``."""
    p_hi = _square(p_hi)
    p_lo = _square(p_lo)
    if p_hi.shape != p_lo.shape:
        raise DimensionError("matrices must have the same shape")
    return bool(np.linalg.eigvalsh(symmetrize(p_hi - p_lo)).min() >= -tol)
