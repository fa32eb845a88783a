import numpy as np
import pytest
from hypothesis import given, strategies as st

from crmac.access import (AccessConfig, ContentionOutcome, Outcome, contend_case1, contend_case2,
                          contention_probabilities)


def test_probability_examples():
    assert contention_probabilities(0, 0.4) == (1.0, 0.0, 0.0)
    assert contention_probabilities(2, 0.5) == pytest.approx((0.25, 0.5, 0.25))
    assert contention_probabilities(3, 0.2) == pytest.approx((0.512, 0.384, 0.104))


@given(st.integers(0, 40), st.floats(0, 1))
def test_probabilities_sum_to_one(u, p):
    t = contention_probabilities(u, p)
    assert all(0 <= x <= 1 for x in t)
    assert sum(t) == pytest.approx(1.0)


def test_case1_trivial(rng):
    assert contend_case1([], 0.7, rng).kind == Outcome.NO_TRANSMISSION
    out = contend_case1([4], 1.0, rng)
    assert out.kind == Outcome.SUCCESS and out.winner == 4


def test_case1_frequencies(rng):
    counts = np.zeros(3)
    for _ in range(100_000):
        counts[contend_case1([0, 1], 0.5, rng).kind] += 1
    assert np.allclose(counts / counts.sum(), [0.25, 0.5, 0.25], atol=0.01)


def test_case2(rng):
    out = contend_case2(1, 1.0, {0}, rng)
    assert out.kind == Outcome.SUCCESS and out.winner == 0
    assert contend_case2(5, 0.0, {0, 1}, rng).kind == Outcome.NO_TRANSMISSION
    succ = sum(contend_case2(8, 0.125, {2}, rng).kind == Outcome.SUCCESS for _ in range(100_000))
    assert abs(succ / 1e5 - 8 * 0.125 * 0.875**7) < 0.01


def test_case2_no_draws_when_nothing_idle():
    r = np.random.default_rng(0)
    contend_case2(8, 0.5, set(), r)
    assert r.random() == np.random.default_rng(0).random()


def test_types():
    with pytest.raises(ValueError):
        ContentionOutcome(Outcome.SUCCESS)
    with pytest.raises(ValueError):
        AccessConfig(1.5)
    with pytest.raises(ValueError):
        AccessConfig(0.5, case=3)
