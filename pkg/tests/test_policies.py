import numpy as np
import pytest

from crmac.channel import ChannelParams
from crmac.estimator import Verdict
from crmac.policies import (OBLIVIOUS, ChannelKnowledge, SensingAssignment, assign_improved,
                            assign_memoryless, assign_negotiate, assign_random,
                            run_sensing_phase, update_knowledge)


def test_memoryless_marginals(rng):
    counts = np.array([assign_memoryless(8, 5, rng).counts for _ in range(100_000)])
    assert abs((counts[:, 0] == 0).mean() - 0.8**8) < 0.005
    assert np.allclose(counts.mean(axis=0), 1.6, atol=0.02)
    assert (counts.sum(axis=1) == 8).all()
    assert list(assign_memoryless(1, 1, rng).counts) == [1]


def test_random_same_draws_as_memoryless():
    a = assign_random(8, 5, np.random.default_rng(9))
    b = assign_memoryless(8, 5, np.random.default_rng(9))
    assert np.array_equal(a.per_user, b.per_user)


def test_negotiate_spreads(rng):
    assert list(assign_negotiate(5, 5, rng).counts) == [1] * 5
    assert (assign_negotiate(3, 5, rng).counts > 0).sum() == 3
    heavy = np.zeros(5)
    for _ in range(20_000):
        c = assign_negotiate(8, 5, rng).counts
        assert sorted(c) == [1, 1, 2, 2, 2]
        heavy += c == 2
    assert np.allclose(heavy / 20_000, 0.6, atol=0.02)


def _knowledge(per_user, M, b0, b1, b2, stops):
    return ChannelKnowledge(frozenset(b0), frozenset(b1), frozenset(b2),
                            SensingAssignment(per_user, M), np.array(stops), np.zeros(M, np.int8))


def test_knowledge_partition_checked():
    with pytest.raises(ValueError):
        _knowledge([0, 1], 2, {0}, {0}, {1}, [1, 1])


def test_improved_no_history_is_memoryless():
    a = assign_improved(None, 8, 5, 5, np.random.default_rng(4))
    b = assign_memoryless(8, 5, np.random.default_rng(4))
    assert np.array_equal(a.per_user, b.per_user)


def test_improved_full_stop_time_keeps_assignment(rng):
    per_user = [0, 0, 1, 2, 3, 4, 4, 4]
    k = _knowledge(per_user, 5, range(5), (), (), [5] * 5)
    assert list(assign_improved(k, 8, 5, 5, rng).per_user) == per_user


def test_improved_two_users_one_moves(rng):
    k = _knowledge([0, 0], 2, {0}, (), {1}, [1, 0])
    hits = 0
    for _ in range(10_000):
        c = assign_improved(k, 2, 2, 5, rng).counts
        assert c[0] >= 1
        hits += c[1] > 0
    assert abs(hits / 10_000 - 0.5) < 0.02


def test_improved_lone_idle_sensor_stays(rng):
    k = _knowledge([0, 1], 3, {0}, {1}, {2}, [1, 1, 0])
    for _ in range(200):
        assert assign_improved(k, 2, 3, 5, rng).per_user[0] == 0


def test_improved_busy_channel_sensors_move_to_unknown(rng):
    k = _knowledge([0, 0, 0, 1], 3, {1}, {0}, {2}, [2, 5, 0])
    seen = set()
    for _ in range(500):
        a = assign_improved(k, 4, 3, 5, rng)
        assert a.per_user[3] == 1            # stop time K_bar: stays
        seen.update(int(x) for x in a.per_user[:3])
    assert seen == {0, 2}


def test_improved_reduces_unsensed(cfg):
    from crmac.engine import run_replication, replication_seeds
    mem = run_replication(cfg, "memoryless", 1, 0.1, 20_000, replication_seeds(3, 1)[0])
    imp = run_replication(cfg, "improved", 1, 0.1, 20_000, replication_seeds(3, 1)[0])
    per_channel = imp.unsensed / (20_000 * cfg.M)
    assert per_channel < 0.8**8
    assert imp.unsensed < mem.unsensed


def test_sensing_single_user_stop_probability(rng):
    ch = [ChannelParams(0.7, 0.7)]
    stops = [run_sensing_phase(SensingAssignment([0], 1), [0], ch, 0.2, 0.8, 5, rng).stop_time[0]
             for _ in range(20_000)]
    assert abs(np.mean(np.array(stops) == 1) - 0.7) < 0.015


def test_sensing_unsensed_and_perfect(rng):
    ch = [ChannelParams(0.7, 0.7, epsilon=0.0, delta=0.0)] * 2
    r = run_sensing_phase(SensingAssignment([0, 0, 0], 2), [0, 1], ch, 0.2, 0.8, 5, rng)
    assert r.verdict[1] == Verdict.UNSENSED and r.stop_time[1] == 0
    assert r.verdict[0] == Verdict.IDLE and r.stop_time[0] == 1
    r = run_sensing_phase(SensingAssignment([1], 2), [0, 1], ch, 0.2, 0.8, 5, rng)
    assert r.verdict[1] == Verdict.BUSY


def test_sensing_stops_at_first_decision(rng, cfg):
    for _ in range(500):
        a = assign_memoryless(8, 5, rng)
        states = rng.integers(0, 2, 5)
        r = run_sensing_phase(a, states, cfg.channels, 0.2, 0.8, 5, rng)
        for m, b in enumerate(r.beliefs):
            u = a.counts[m]
            if u == 0:
                continue
            assert b.k == u * r.stop_time[m]
            if r.verdict[m] == Verdict.UNDECIDED:
                assert r.stop_time[m] == 5
            # every earlier prefix was undecided: stopping can only happen once
            if r.verdict[m] == Verdict.IDLE:
                assert b.a >= 0.8


def test_oblivious_majority(rng):
    ch = [ChannelParams(0.7, 0.7, epsilon=0.0, delta=0.0)]
    r = run_sensing_phase(SensingAssignment([0, 0], 1), [0], ch, 0.2, 0.8, 5, rng, mode=OBLIVIOUS)
    assert r.verdict[0] == Verdict.IDLE and r.stop_time[0] == 1


def test_update_knowledge_transmission_overrides(rng):
    a = SensingAssignment([0, 1, 1], 3)
    from crmac.policies import SensingPhaseResult
    sensing = SensingPhaseResult(np.array([1, 5, 0]),
                                 np.array([Verdict.IDLE, Verdict.UNDECIDED, Verdict.UNSENSED]))
    k = update_knowledge(a, sensing, [1, -1, -1])
    assert k.b1 == {0} and k.b2 == {1, 2} and not k.b0
    assert list(k.prior_kind) == [2, 0, 0]
