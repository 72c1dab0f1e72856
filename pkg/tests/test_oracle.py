import math

import numpy as np
import pytest

from bermudan.oracle import (ChainReward, FiniteChain, binomial_bermudan_put, black_scholes_put,
                             converged_bermudan_put, dp_exact, load_chain, random_chain,
                             save_chain, theta_representation_check)
from bermudan.rng import SeedPlan


def test_single_state_chain():
    T, r, c = 6, 0.1, 2.5
    chain = FiniteChain(np.zeros((1, 1)), np.ones((T, 1, 1)))
    rewards = c * np.exp(-r * np.arange(T + 1))[:, None]
    q, v = dp_exact(chain, rewards)
    np.testing.assert_allclose(q[:T, 0], c * np.exp(-r * (np.arange(T) + 1)), rtol=1e-15)
    assert q[T, 0] == 0
    np.testing.assert_allclose(v[:, 0], rewards[:, 0])


def test_two_state_chain(two_state_chain):
    chain, rewards = two_state_chain
    q, v = dp_exact(chain, rewards)
    np.testing.assert_array_equal(q[2], [0, 0])
    np.testing.assert_array_equal(q[1], [1, 1])
    np.testing.assert_array_equal(q[0], [1, 1])
    np.testing.assert_array_equal(v[1], [1, 1])


def test_value_dominates_and_resubstitutes(random_chains):
    for chain, rewards in random_chains:
        q, v = dp_exact(chain, rewards)
        assert np.all(v >= rewards) and np.all(v >= q)
        for t in range(chain.steps):
            resid = q[t] - chain.transitions[t] @ np.maximum(rewards[t + 1], q[t + 1])
            assert np.abs(resid).max() < 1e-12


def test_representation_holds_for_every_window(random_chains):
    for chain, rewards in random_chains:
        q, _ = dp_exact(chain, rewards)
        T = chain.steps
        for t in range(T):
            for w in range(T - t):
                got = theta_representation_check(chain, rewards, q, t, w)
                assert np.abs(got - q[t]).max() < 1e-12


def test_window_zero_is_one_step_expectation(random_chains):
    chain, rewards = random_chains[2]
    rng = np.random.default_rng(5)
    fake_q = rng.uniform(0, 3, size=(chain.steps + 1, chain.n_states))
    for t in range(chain.steps):
        got = theta_representation_check(chain, rewards, fake_q, t, 0)
        want = chain.transitions[t] @ np.maximum(rewards[t + 1], fake_q[t + 1])
        np.testing.assert_allclose(got, want, rtol=1e-13)


def test_representation_errors(random_chains):
    chain, rewards = random_chains[0]
    q, _ = dp_exact(chain, rewards)
    with pytest.raises(ValueError):
        theta_representation_check(chain, rewards, q, 0, chain.steps)
    with pytest.raises(ValueError):
        theta_representation_check(chain, rewards, q, 0, 1, budget=1)


def test_fixture_round_trip(tmp_path):
    chain, rewards = random_chain(np.random.default_rng(3), 4, 3, d=2)
    path = tmp_path / "c.txt"
    save_chain(path, chain, rewards)
    back, back_rewards = load_chain(path)
    np.testing.assert_array_equal(back.states, chain.states)
    np.testing.assert_array_equal(back.transitions, chain.transitions)
    np.testing.assert_array_equal(back_rewards, rewards)
    assert back.initial == chain.initial


def test_load_and_validation_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 1 1\n0\n1\n0.5 0.5\n")
    with pytest.raises(ValueError):
        load_chain(path)
    with pytest.raises(ValueError):
        FiniteChain(np.zeros((2, 1)) + [[0], [1]], np.array([[[0.6, 0.6], [0.5, 0.5]]]))
    with pytest.raises(ValueError):
        FiniteChain(np.zeros((2, 1)), np.full((1, 2, 2), 0.5))
    with pytest.raises(ValueError):
        FiniteChain(np.array([[0.0], [1.0]]), np.array([[[1.2, -0.2], [0.5, 0.5]]]))
    chain = FiniteChain(np.array([[0.0], [1.0]]), np.full((1, 2, 2), 0.5))
    with pytest.raises(ValueError):
        ChainReward(chain, np.zeros((1, 2)))


def test_chain_simulation_frequencies(random_chains):
    chain, _ = random_chains[1]
    idx = chain.simulate_indices(40_000, SeedPlan(9))
    counts = np.bincount(idx[:, 1], minlength=chain.n_states) / idx.shape[0]
    np.testing.assert_allclose(counts, chain.transitions[0][chain.initial], atol=0.01)


def test_lattice_zero_volatility_limit():
    price = binomial_bermudan_put(80, 90, 0.05, 0.002, 1.0, 12, 1440)
    assert abs(price - (90 * math.exp(-0.05 / 12) - 80)) < 1e-6
    assert abs(price - 9.625780) < 1e-6


def test_lattice_european_matches_black_scholes():
    bs = black_scholes_put(100, 100, 0.05, 0.25, 1.0)
    lat = binomial_bermudan_put(100, 100, 0.05, 0.25, 1.0, 12, 2400, dates=[12])
    assert abs(lat - bs) < 5e-3


def test_lattice_ordering():
    args = (100, 100, 0.05, 0.25, 1.0)
    euro = binomial_bermudan_put(*args, 12, 1440, dates=[12])
    monthly = binomial_bermudan_put(*args, 12, 1440)
    weekly = binomial_bermudan_put(*args, 48, 1440)
    american = binomial_bermudan_put(*args, 1440, 1440)
    assert euro <= monthly <= weekly <= american
    assert monthly - euro > 0.1


def test_lattice_errors():
    with pytest.raises(ValueError):
        binomial_bermudan_put(100, 100, 0.05, 0.25, 1.0, 12, 1000)
    with pytest.raises(ValueError):
        binomial_bermudan_put(100, 100, 0.05, 0.25, 1.0, 12, 120, dates=[13])


def test_converged_lattice_reports_gap():
    price, N, gap = converged_bermudan_put(100, 90, 0.05, 0.25, 1.0, 12)
    assert gap < 1e-3 and N % 12 == 0
    assert abs(price - binomial_bermudan_put(100, 90, 0.05, 0.25, 1.0, 12, N)) < 1e-12
    assert 3.92 < price < 3.94
