import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scalar_params
from lgds_bandit.env import generate_instance
from lgds_bandit.errors import DimensionError, InputError
from lgds_bandit.kalman import kalman_init, kalman_update, predict_reward
from lgds_bandit.matops import riccati_step, solve_lyapunov


def test_init_identity_prior():
    params = scalar_params(sigma0=1.0)
    st0 = kalman_init(params)
    assert st0.p[0, 0] == 1.0 and st0.z_hat[0] == 0.0


def test_init_lyapunov_prior():
    params = generate_instance(4, 3, 0)
    np.testing.assert_array_equal(kalman_init(params).p, params.sigma0)


def test_init_predicts_zero():
    params = generate_instance(4, 3, 0)
    st0 = kalman_init(params)
    assert all(predict_reward(st0, a) == 0.0 for a in params.actions)


def test_predict_reward_examples():
    params = generate_instance(2, 2, 0)
    st0 = kalman_init(params, z_hat0=[1.0, 2.0])
    assert predict_reward(st0, [0.0, 1.0]) == 2.0
    with pytest.raises(DimensionError):
        predict_reward(st0, [1.0, 0.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(-10, 10), seed=st.integers(0, 1000))
def test_predict_reward_linear(alpha, seed):
    rng = np.random.default_rng(seed)
    params = generate_instance(3, 2, seed)
    z = rng.standard_normal(3)
    a = params.actions[0]
    lhs = predict_reward(kalman_init(params, z_hat0=alpha * z), a)
    assert lhs == pytest.approx(alpha * predict_reward(kalman_init(params, z_hat0=z), a), abs=1e-12)


def test_update_scalar_example():
    params = scalar_params(sigma0=1.0)
    out = kalman_update(kalman_init(params), [1.0], 2.0, params)
    assert out.z_hat[0] == pytest.approx(0.9, abs=1e-15)
    assert out.p[0, 0] == pytest.approx(1.405, abs=1e-15)
    # independent scalar recursion
    p, k = 1.0, 1.0 / (1.0 + 1.0)
    assert k == 0.5
    assert out.p[0, 0] == pytest.approx(0.81 * p + 1.0 - 0.81 * p * p / (p + 1.0), abs=1e-15)


def test_update_zero_innovation():
    params = generate_instance(3, 3, 4)
    st0 = kalman_init(params, z_hat0=[0.3, -1.0, 2.0])
    a = params.actions[1]
    out = kalman_update(st0, a, float(a @ st0.z_hat), params)
    np.testing.assert_array_equal(out.z_hat, params.gamma @ st0.z_hat)


def test_update_zero_covariance_ignores_reward():
    params = generate_instance(3, 3, 4)
    st0 = kalman_init(params, p0=np.zeros((3, 3)), z_hat0=[1.0, 0.0, 0.5])
    for x in (-100.0, 0.0, 7.5):
        np.testing.assert_allclose(kalman_update(st0, params.actions[0], x, params).z_hat,
                                   params.gamma @ st0.z_hat, atol=1e-15)


def test_update_rejects_nonfinite():
    params = scalar_params()
    for x in (np.nan, np.inf):
        with pytest.raises(InputError):
            kalman_update(kalman_init(params), [1.0], x, params)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), seq=st.lists(st.integers(0, 3), min_size=1, max_size=25))
def test_covariance_matches_riccati_property(seed, seq):
    params = generate_instance(4, 4, seed)
    rng = np.random.default_rng(seed)
    st_ = kalman_init(params)
    p = params.sigma0.copy()
    for i in seq:
        a = params.actions[i]
        st_ = kalman_update(st_, a, float(rng.standard_normal()), params)
        p = riccati_step(p, a, params.gamma, params.q, params.sigma2)
        assert np.max(np.abs(st_.p - p)) <= 1e-12 * (1 + np.max(np.abs(p)))
        np.testing.assert_allclose(st_.p, st_.p.T, atol=1e-10)
        assert np.linalg.eigvalsh(st_.p).min() >= -1e-10


def _replicates(params, seq, reps, seed):
    """Vectorized filter over independent replicates; returns z, z_hat and P at the last round."""
    rng = np.random.default_rng(seed)
    d = params.d
    chol0 = np.linalg.cholesky(params.sigma0)
    cholq = np.linalg.cholesky(params.q)
    z = rng.standard_normal((reps, d)) @ chol0.T
    z_hat = np.zeros((reps, d))
    p = params.sigma0.copy()
    ref = kalman_init(params)
    for i in seq:
        a = params.actions[i]
        x = z @ a + np.sqrt(params.sigma2) * rng.standard_normal(reps)
        gain = p @ a / (a @ p @ a + params.sigma2)
        z_hat = (z_hat + np.outer(x - z_hat @ a, gain)) @ params.gamma.T
        p = riccati_step(p, a, params.gamma, params.q, params.sigma2)
        ref = kalman_update(ref, a, float(x[0]), params)
        z = z @ params.gamma.T + rng.standard_normal((reps, d)) @ cholq.T
    np.testing.assert_allclose(ref.z_hat, z_hat[0], rtol=1e-9, atol=1e-9)
    return z, z_hat, p


@pytest.fixture(scope="module")
def replicate_run():
    params = generate_instance(3, 3, 17)
    seq = [0, 1, 2, 2, 0, 1, 0, 0, 2, 1]
    return params, _replicates(params, seq, 100_000, 5)


def test_orthogonality(replicate_run):
    _, (z, z_hat, _) = replicate_run
    inner = np.einsum("ij,ij->i", z - z_hat, z_hat)
    se = inner.std(ddof=1) / np.sqrt(inner.size)
    assert abs(inner.mean()) <= 3 * se


def test_error_covariance(replicate_run):
    _, (z, z_hat, p) = replicate_run
    cov = np.cov((z - z_hat)[:10_000], rowvar=False)
    assert np.linalg.norm(cov - p) <= 0.10 * np.linalg.norm(p)


def test_quadratic_identity(replicate_run):
    _, (z, z_hat, p) = replicate_run
    lhs = np.mean(np.sum(z**2, axis=1))
    rhs = np.mean(np.sum(z_hat**2, axis=1)) + np.trace(p)
    assert lhs == pytest.approx(rhs, rel=0.05)


def test_tower_property():
    params = generate_instance(3, 3, 2)
    rng = np.random.default_rng(0)
    st0 = kalman_init(params, p0=solve_lyapunov(params.gamma, params.q), z_hat0=rng.standard_normal(3))
    a = params.actions[0]
    sd = np.sqrt(a @ st0.p @ a + params.sigma2)
    xs = a @ st0.z_hat + sd * rng.standard_normal(5000)
    outs = np.array([kalman_update(st0, a, float(x), params).z_hat for x in xs])
    target = params.gamma @ st0.z_hat
    se = outs.std(axis=0, ddof=1) / np.sqrt(len(xs))
    assert np.all(np.abs(outs.mean(axis=0) - target) <= 3 * se + 1e-12)
