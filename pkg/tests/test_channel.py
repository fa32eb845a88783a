import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crmac.channel import (BUSY, IDLE, ChannelParams, ChannelStateVector, DegenerateChannelError,
                           initial_states, sample_path, stationary_probabilities, step_channels)


@pytest.mark.parametrize("lam,mu,eta", [(0.5, 0.5, 0.5), (1.0, 0.3, 0.0), (0.7, 0.7, 0.3)])
def test_stationary_examples(lam, mu, eta):
    e, z = stationary_probabilities(ChannelParams(lam, mu))
    assert e == pytest.approx(eta, abs=1e-15)
    assert e + z == pytest.approx(1.0)


def test_degenerate_chain():
    with pytest.raises(DegenerateChannelError, match="no unique stationary distribution"):
        stationary_probabilities(ChannelParams(1.0, 0.0))


@given(st.floats(0, 1), st.floats(0, 1))
def test_stationary_sums_to_one(lam, mu):
    if lam == 1.0 and mu == 0.0:
        return
    e, z = stationary_probabilities(ChannelParams(lam, mu))
    assert 0 <= e <= 1 and 0 <= z <= 1
    assert e + z == pytest.approx(1.0)
    # balance: flow idle->busy equals flow busy->idle
    assert z * (1 - lam) == pytest.approx(e * mu, abs=1e-12)


def test_param_validation():
    with pytest.raises(ValueError):
        ChannelParams(1.2, 0.5)
    with pytest.raises(ValueError):
        ChannelParams(0.5, 0.5, epsilon=0.6)
    with pytest.raises(ValueError):
        ChannelParams(0.5, 0.5, rate=0)


def test_from_utilization_and_lambda():
    c = ChannelParams.from_utilization(0.3)
    assert (c.lam, c.mu) == pytest.approx((0.7, 0.7))
    c = ChannelParams.from_lambda(0.3, 0.7)
    assert c.mu == pytest.approx(0.7)
    c = ChannelParams.from_utilization(0.4, correlation=0.5)
    assert c.eta == pytest.approx(0.4)
    assert c.lam - c.mu == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ChannelParams.from_lambda(0.1, 0.5)     # mu would exceed 1


def test_step_forced_transitions(rng):
    s = ChannelStateVector([BUSY, IDLE, BUSY], 4)
    nxt = step_channels(s, [ChannelParams(1.0, 1.0)] * 3, rng)
    assert list(nxt.states) == [IDLE] * 3 and nxt.slot_index == 5
    s = ChannelStateVector([BUSY])
    for _ in range(50):
        s = step_channels(s, [ChannelParams(0.0, 0.0)], rng)
    assert s.states[0] == BUSY


def test_step_reproducible():
    params = [ChannelParams(0.7, 0.7)] * 4
    s = ChannelStateVector([0, 1, 0, 1])
    a = step_channels(s, params, np.random.default_rng(3))
    b = step_channels(s, params, np.random.default_rng(3))
    assert np.array_equal(a.states, b.states)


def test_busy_fraction_monte_carlo():
    path = sample_path(ChannelParams(0.7, 0.7), 10**6, np.random.default_rng(1))
    assert abs(path.mean() - 0.30) < 0.01


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_sample_path_matches_stepping(lam, mu, seed):
    params = ChannelParams(lam, mu)
    T = 200
    path = sample_path(params, T, np.random.default_rng(seed))
    r = np.random.default_rng(seed)
    s = initial_states([params], [r])
    ref = [s.states[0]]
    for _ in range(T - 1):
        s = step_channels(s, [params], [r])
        ref.append(s.states[0])
    assert np.array_equal(path, np.array(ref, dtype=np.int8))


@pytest.mark.parametrize("lam,mu", [(0.9, 0.3), (0.2, 0.6), (0.7, 0.7)])
def test_empirical_busy_fraction_within_3_sigma(lam, mu):
    params = ChannelParams(lam, mu)
    T = 200_000
    path = sample_path(params, T, np.random.default_rng(7))
    eta = params.eta
    # effective sample size shrinks with the lag-one correlation lam - mu
    rho = lam - mu
    se = np.sqrt(eta * (1 - eta) / T * (1 + rho) / (1 - rho))
    assert abs(path.mean() - eta) < 3 * se
