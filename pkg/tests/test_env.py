import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgds_bandit.env import (
    LgdsParams,
    burn_in,
    dumps_instance,
    generate_instance,
    init_state,
    load_instance,
    loads_instance,
    save_instance,
    simulate_path,
    step,
)
from lgds_bandit.errors import (
    DimensionError,
    InputError,
    InstabilityError,
    InstanceFormatError,
    ParameterError,
)
from lgds_bandit.matops import solve_lyapunov, spectral_radius


def zero_noise_params(gamma, actions, sigma0=None):
    d = len(gamma)
    return LgdsParams(
        gamma=gamma,
        q=np.zeros((d, d)),
        sigma2=1e-300,
        actions=actions,
        sigma0=np.zeros((d, d)) if sigma0 is None else sigma0,
    )


# -- generate_instance ---------------------------------------------------------

def test_generate_spectral_radius():
    params = generate_instance(10, 10, 42)
    assert spectral_radius(params.gamma) == pytest.approx(0.99, abs=1e-9)
    params.validate()


def test_generate_scalar_actions_are_signs():
    params = generate_instance(1, 2, 7)
    assert set(np.abs(params.actions.ravel())) == {1.0}


def test_generate_deterministic():
    a, b = generate_instance(4, 3, 11), generate_instance(4, 3, 11)
    for name in ("gamma", "q", "actions", "sigma0"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.sigma2 == b.sigma2


def test_generate_seeds_differ():
    assert not np.array_equal(generate_instance(3, 3, 1).gamma, generate_instance(3, 3, 2).gamma)


def test_generate_sigma0_is_lyapunov():
    params = generate_instance(5, 4, 3)
    np.testing.assert_allclose(params.sigma0, solve_lyapunov(params.gamma, params.q), rtol=1e-12)


def test_generate_rejects_bad_sizes():
    with pytest.raises(ParameterError):
        generate_instance(0, 3, 0)
    with pytest.raises(ParameterError):
        generate_instance(3, 1, 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.integers(1, 6), k=st.integers(2, 6))
def test_generate_invariants_property(seed, d, k):
    params = generate_instance(d, k, seed)
    params.validate()
    assert params.actions.shape == (k, d)
    np.testing.assert_allclose(np.linalg.norm(params.actions, axis=1), 1.0, atol=1e-12)
    assert params.sigma2 > 0


# -- LgdsParams ----------------------------------------------------------------

def test_params_are_read_only():
    params = generate_instance(2, 2, 0)
    with pytest.raises(ValueError):
        params.gamma[0, 0] = 1.0


def test_validate_rejects_unstable():
    p = LgdsParams(gamma=np.eye(2), q=np.eye(2), sigma2=1.0, actions=np.eye(2), sigma0=np.eye(2))
    with pytest.raises(InstabilityError):
        p.validate()


def test_validate_rejects_non_unit_action():
    p = LgdsParams(gamma=0.5 * np.eye(2), q=np.eye(2), sigma2=1.0,
                   actions=[[1.0, 0.0], [1.0, 1.0]], sigma0=np.eye(2))
    with pytest.raises(ParameterError):
        p.validate()


def test_validate_rejects_single_action():
    p = LgdsParams(gamma=[[0.5]], q=[[1.0]], sigma2=1.0, actions=[[1.0]], sigma0=[[1.0]])
    with pytest.raises(ParameterError):
        p.validate()


def test_params_dimension_mismatch():
    with pytest.raises(DimensionError):
        LgdsParams(gamma=np.eye(2), q=np.eye(3), sigma2=1.0, actions=np.eye(2), sigma0=np.eye(2))


# -- init_state ----------------------------------------------------------------

def test_init_zero_covariance():
    params = zero_noise_params(np.eye(2) * 0.5, np.eye(2))
    np.testing.assert_array_equal(init_state(params, 3).z, np.zeros(2))


def test_init_identity_covariance_lln():
    params = LgdsParams(gamma=0.5 * np.eye(3), q=np.eye(3), sigma2=1.0, actions=np.eye(3), sigma0=np.eye(3))
    draws = np.array([init_state(params, s).z for s in range(100_000)])
    cov = np.cov(draws, rowvar=False)
    assert np.linalg.norm(cov - np.eye(3)) <= 0.05 * np.linalg.norm(np.eye(3))


def test_init_deterministic():
    params = generate_instance(4, 2, 0)
    np.testing.assert_array_equal(init_state(params, 9).z, init_state(params, 9).z)
    assert init_state(params, 9).t == 0


def test_init_rejects_indefinite_sigma0():
    params = LgdsParams(gamma=0.5 * np.eye(2), q=np.eye(2), sigma2=1.0, actions=np.eye(2),
                        sigma0=np.diag([1.0, -1.0]))
    with pytest.raises(ParameterError):
        init_state(params, 0)


# -- burn_in -------------------------------------------------------------------

def test_burn_in_zero_iters_unchanged():
    params = generate_instance(3, 2, 1)
    state = init_state(params, 5)
    z0 = state.z.copy()
    burn_in(state, params, 0)
    np.testing.assert_array_equal(state.z, z0)
    assert state.t == 0


def test_burn_in_zero_dynamics():
    params = zero_noise_params(np.zeros((2, 2)), np.eye(2), sigma0=np.eye(2))
    state = burn_in(init_state(params, 0), params, 17)
    np.testing.assert_array_equal(state.z, np.zeros(2))


def test_burn_in_resets_round_counter():
    params = generate_instance(2, 2, 1)
    state = init_state(params, 0)
    step(state, params, 0)
    assert state.t == 1
    assert burn_in(state, params, 5).t == 0


def test_burn_in_rejects_negative():
    params = generate_instance(2, 2, 1)
    with pytest.raises(ParameterError):
        burn_in(init_state(params, 0), params, -1)


def test_burn_in_matches_recursion():
    params = generate_instance(3, 2, 8)
    state = init_state(params, 4)
    z = state.z.copy()
    # replay the same stream by hand
    ref_rng = np.random.default_rng(4)
    ref_rng.standard_normal(3)
    chol = np.linalg.cholesky(params.q)
    xi = ref_rng.standard_normal((150, 3)) @ chol.T
    for row in xi:
        z = params.gamma @ z + row
    burn_in(state, params, 150)
    np.testing.assert_allclose(state.z, z, rtol=1e-10, atol=1e-10)


def test_burn_in_scalar_stationary_variance():
    params = LgdsParams(gamma=[[0.9]], q=[[1.0]], sigma2=1.0, actions=[[1.0], [-1.0]], sigma0=[[0.0]])
    finals = np.array([burn_in(init_state(params, s), params, 10_000).z[0] for s in range(10_000)])
    target = 1.0 / (1.0 - 0.81)
    assert np.var(finals, ddof=1) == pytest.approx(target, rel=0.05)


def test_burn_in_covariance_reaches_lyapunov():
    params = generate_instance(3, 2, 21)
    z_cov = solve_lyapunov(params.gamma, params.q)
    # start at zero and check the long-run spread
    start = LgdsParams(gamma=params.gamma, q=params.q, sigma2=params.sigma2, actions=params.actions,
                       sigma0=np.zeros((3, 3)))
    finals = np.array([burn_in(init_state(start, s), start, 2_000).z for s in range(10_000)])
    cov = np.cov(finals, rowvar=False)
    assert np.linalg.norm(cov - z_cov) <= 0.10 * np.linalg.norm(z_cov)


# -- step ----------------------------------------------------------------------

def test_step_noise_free_identity():
    params = LgdsParams(gamma=np.eye(2), q=np.zeros((2, 2)), sigma2=0.0, actions=np.eye(2),
                        sigma0=np.zeros((2, 2)))
    state = init_state(params, 0)
    state.z = np.array([1.0, 0.0])
    out = step(state, params, 0)
    assert out.reward == 1.0
    np.testing.assert_array_equal(out.state.z, [1.0, 0.0])
    assert out.state.t == 1


def test_step_zero_state():
    params = LgdsParams(gamma=0.5 * np.eye(2), q=np.eye(2), sigma2=0.25, actions=np.eye(2),
                        sigma0=np.zeros((2, 2)))
    rewards = []
    for s in range(4000):
        state = init_state(params, s)
        out = step(state, params, 1)
        assert out.x_star == 0.0
        rewards.append(out.reward)
    assert np.std(rewards) == pytest.approx(0.5, rel=0.05)
    assert abs(np.mean(rewards)) < 3 * 0.5 / np.sqrt(4000)


def test_step_oracle_index():
    params = LgdsParams(gamma=0.5 * np.eye(2), q=np.eye(2), sigma2=1.0, actions=np.eye(2),
                        sigma0=np.zeros((2, 2)))
    state = init_state(params, 0)
    state.z = np.array([1.0, 2.0])
    out = step(state, params, 0)
    assert out.oracle_index == 1
    assert out.x_star == 2.0


def test_step_tie_lowest_index():
    params = LgdsParams(gamma=0.5 * np.eye(2), q=np.eye(2), sigma2=1.0, actions=[[1.0, 0.0], [1.0, 0.0]],
                        sigma0=np.zeros((2, 2)))
    state = init_state(params, 0)
    state.z = np.array([1.0, 0.0])
    assert step(state, params, 1).oracle_index == 0


def test_step_rejects_bad_index():
    params = generate_instance(2, 3, 0)
    state = init_state(params, 0)
    for bad in (-1, 3):
        with pytest.raises(InputError):
            step(state, params, bad)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), actions=st.lists(st.integers(0, 2), min_size=1, max_size=20))
def test_pseudo_regret_nonnegative_property(seed, actions):
    params = generate_instance(3, 3, seed)
    state = init_state(params, seed)
    for i in actions:
        z = state.z.copy()
        out = step(state, params, i)
        assert out.x_star - (params.actions @ z)[i] >= 0


def test_replay_determinism():
    params = generate_instance(4, 3, 2)
    seq = [0, 2, 1, 1, 0, 2, 2]

    def run():
        state = burn_in(init_state(params, 99), params, 100)
        zs, rs = [], []
        for i in seq:
            zs.append(state.z.copy())
            rs.append(step(state, params, i).reward)
        return np.array(zs), np.array(rs)

    z1, r1 = run()
    z2, r2 = run()
    np.testing.assert_array_equal(z1, z2)
    np.testing.assert_array_equal(r1, r2)


def test_trajectory_independent_of_actions():
    params = generate_instance(3, 3, 5)
    s1, s2 = init_state(params, 1), init_state(params, 1)
    for t in range(30):
        step(s1, params, t % 3)
        step(s2, params, 0)
    np.testing.assert_array_equal(s1.z, s2.z)


@pytest.mark.parametrize("n", [0, 1, 37])
def test_simulate_path_matches_step(n):
    params = generate_instance(4, 3, 6)
    a = burn_in(init_state(params, 3), params, 10)
    b = burn_in(init_state(params, 3), params, 10)
    path = simulate_path(a, params, n)
    for t in range(n):
        np.testing.assert_allclose(path.z[t], b.z, rtol=1e-12, atol=1e-12)
        out = step(b, params, t % 3)
        assert out.reward == pytest.approx(params.actions[t % 3] @ path.z[t] + path.eta[t], abs=1e-12)
    np.testing.assert_allclose(a.z, b.z, rtol=1e-12, atol=1e-12)
    assert a.t == b.t == n


# -- serialization -------------------------------------------------------------

def test_json_roundtrip_exact(tmp_path):
    params = generate_instance(5, 4, 123)
    path = tmp_path / "inst.json"
    save_instance(params, path)
    back = load_instance(path)
    for name in ("gamma", "q", "actions", "sigma0"):
        np.testing.assert_array_equal(getattr(back, name), getattr(params, name))
    assert back.sigma2 == params.sigma2
    assert back.seed == 123
    doc = json.loads(path.read_text())
    assert doc["d"] == 5 and doc["k"] == 4


def test_json_parse_error_reports_line():
    text = dumps_instance(generate_instance(2, 2, 0)).replace('"sigma2"', "sigma2", 1)
    with pytest.raises(InstanceFormatError, match="line"):
        loads_instance(text)


def test_json_missing_key():
    doc = generate_instance(2, 2, 0).to_dict()
    del doc["gamma"]
    with pytest.raises(InstanceFormatError, match="gamma"):
        loads_instance(json.dumps(doc))


def test_json_shape_disagreement():
    doc = generate_instance(2, 2, 0).to_dict()
    doc["d"] = 3
    with pytest.raises(InstanceFormatError):
        loads_instance(json.dumps(doc))
