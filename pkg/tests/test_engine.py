import numpy as np
import pytest

from crmac.channel import ChannelParams, step_channels
from crmac.config import ScenarioConfig
from crmac.engine import (SimState, access_probability, initial_state, mean_ci, replication_seeds,
                          replication_streams, run_replication, run_simulation, run_slot)
from crmac.estimator import Verdict
from crmac.policies import SCHEMES


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("case", [1, 2])
def test_compiled_loop_matches_reference(cfg, scheme, case):
    T = 300
    ss = replication_seeds(7, 1)[0]
    rep = run_replication(cfg, scheme, case, 0.3, T, ss, record=True)
    rec = rep.records
    protocol, chan_rngs = replication_streams(ss, cfg.M)
    state = initial_state(cfg, chan_rngs)
    for t in range(T):
        tr = run_slot(state, scheme, case, cfg, 0.3, protocol)
        assert np.array_equal(tr.channels.states, rec["states"][t])
        assert np.array_equal(tr.assignment.counts, rec["counts"][t])
        assert np.array_equal(tr.sensing.verdict, rec["verdict"][t])
        assert np.array_equal(tr.sensing.stop_time, rec["stop"][t])
        assert np.allclose(tr.delivered_bits, rec["bits"][t])
        assert np.array_equal(tr.pu_collision.astype(int), rec["collision"][t])
        state.channels = step_channels(state.channels, cfg.channels, chan_rngs)


def test_slot_invariants(cfg, rng):
    state = SimState(initial_state(cfg, [rng] * cfg.M).channels)
    cap1 = 1e6 * (4 * 9e-6 + cfg.T_data)
    for case in (1, 2):
        for scheme in SCHEMES:
            for _ in range(300):
                tr = run_slot(state, scheme, case, cfg, 0.5, rng)
                s = tr.channels.states
                v = tr.sensing.verdict
                assert np.all(tr.delivered_bits[(s == 1) | (v != Verdict.IDLE)] == 0)
                assert np.all(tr.pu_collision[s == 0] == 0)
                assert np.all(tr.pu_collision[v != Verdict.IDLE] == 0)
                assert np.all(tr.delivered_bits <= (cap1 if case == 1 else 1e6 * cfg.T_data) + 1e-6)
                winners = {o.winner for o in tr.outcomes if o is not None and o.winner is not None}
                if case == 2:
                    assert len(winners) <= 1
                state.channels = step_channels(state.channels, cfg.channels, rng)


def test_all_busy_perfect_detection(rng):
    c = ScenarioConfig(channels=tuple(ChannelParams(0.0, 0.0, delta=0.0) for _ in range(5)))
    state = SimState(initial_state(c, [rng] * 5).channels)
    state.channels.states[:] = 1
    for _ in range(50):
        tr = run_slot(state, "memoryless", 1, c, 1.0, rng)
        assert tr.delivered_bits.sum() == 0 and not tr.pu_collision.any()


def test_single_perfect_user_deterministic():
    c = ScenarioConfig(M=1, N=1, channels=(ChannelParams(1.0, 1.0, epsilon=0.0, delta=0.0),))
    rep = run_replication(c, "memoryless", 1, 1.0, 1000, replication_seeds(1, 1)[0], record=True)
    assert np.allclose(rep.records["bits"], 1e6 * (4 * 9e-6 + 1.845e-3))


def test_all_busy_throughput_zero():
    c = ScenarioConfig(channels=tuple(ChannelParams(0.0, 0.0) for _ in range(5)))
    m = run_simulation(c, "memoryless", 1, num_slots=2000, num_replications=2, p=0.5)
    assert np.all(m.throughput == 0)


def test_never_busy_channel_collision_undefined():
    chans = (ChannelParams(1.0, 1.0),) + tuple(ChannelParams(0.7, 0.7) for _ in range(4))
    c = ScenarioConfig(channels=chans)
    m = run_simulation(c, "random", 1, num_slots=2000, num_replications=2, p=0.3)
    assert np.isnan(m.collision_per_channel[:, 0]).all()
    assert not np.isnan(m.collision).any()


def test_determinism(cfg):
    a = run_simulation(cfg, "improved", 2, num_slots=3000, num_replications=3)
    b = run_simulation(cfg, "improved", 2, num_slots=3000, num_replications=3)
    for f in ("throughput", "collision", "primary_throughput", "unsensed", "undecided"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_channel_paths_shared_across_schemes(cfg):
    ss = replication_seeds(5, 2)[1]
    a = run_replication(cfg, "random", 1, 0.2, 500, ss, record=True)
    b = run_replication(cfg, "improved", 2, 0.2, 500, ss, record=True)
    assert np.array_equal(a.records["states"], b.records["states"])


def test_mean_ci():
    m, h = mean_ci([1.0, 2.0, 3.0])
    assert m == 2.0 and h == pytest.approx(4.302652729911275 * 1 / np.sqrt(3))
    assert mean_ci([5.0]) == (5.0, 0.0)


def test_access_probability_policy(cfg):
    p_mem = access_probability(cfg, "memoryless", 1)
    assert access_probability(cfg, "random", 1) == p_mem
    assert access_probability(cfg.replace(baseline_p=0.2), "negotiate", 1) == 0.2
    assert access_probability(cfg.replace(p=0.25), "improved", 2) == 0.25


def test_memoryless_matches_analysis_short(cfg):
    from crmac.analytics import throughput
    p = access_probability(cfg, "memoryless", 1)
    m = run_simulation(cfg, "memoryless", 1, num_slots=50_000, num_replications=2, p=p)
    assert m.throughput.mean() == pytest.approx(throughput(cfg, 1, p).omega, rel=0.05)
