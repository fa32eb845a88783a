"""Per-slot channel assignment rules and the sensing phase.

Users and channels are 0-based here. The draw order in every function is
part of the contract: the compiled engine consumes the protocol stream in
exactly the same order, which lets the two be compared slot by slot.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ChannelParams
from .estimator import BeliefState, Verdict

SCHEMES = ("random", "negotiate", "memoryless", "improved")
BAYESIAN = "bayesian"
OBLIVIOUS = "oblivious"

# prior kinds used by the improved policy
PRIOR_STATIONARY, PRIOR_AFTER_IDLE, PRIOR_AFTER_BUSY = 0, 1, 2


def sensing_mode(scheme: str) -> str:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
    return BAYESIAN if scheme in ("memoryless", "improved") else OBLIVIOUS


@dataclass
class SensingAssignment:
    per_user: np.ndarray
    num_channels: int

    def __post_init__(self):
        self.per_user = np.asarray(self.per_user, dtype=np.int64)
        if np.any(self.per_user < 0) or np.any(self.per_user >= self.num_channels):
            raise ValueError("user assigned to a channel outside 0..M-1")

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.per_user, minlength=self.num_channels)

    def sensors(self, m: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.per_user == m)]


@dataclass
class SensingPhaseResult:
    stop_time: np.ndarray          # 0 when the channel is unsensed
    verdict: np.ndarray            # Verdict codes
    beliefs: list = field(default_factory=list)

    @property
    def idle_channels(self) -> list[int]:
        return [int(m) for m in np.flatnonzero(self.verdict == Verdict.IDLE)]


@dataclass
class ChannelKnowledge:
    """What the network learned about each channel in the previous slot."""

    b0: frozenset
    b1: frozenset
    b2: frozenset
    prev_assignment: SensingAssignment
    prev_stop_times: np.ndarray
    prior_kind: np.ndarray

    def __post_init__(self):
        m = self.prev_assignment.num_channels
        if (self.b0 | self.b1 | self.b2) != frozenset(range(m)) or \
                len(self.b0) + len(self.b1) + len(self.b2) != m:
            raise ValueError("B0, B1, B2 must partition the channel set")


def assign_memoryless(N: int, M: int, rng) -> SensingAssignment:
    """Every user picks a channel uniformly and independently."""
    if N < 1 or M < 1:
        raise ValueError("need N >= 1 and M >= 1")
    return SensingAssignment(np.array([rng.integers(0, M) for _ in range(N)]), M)


def assign_random(N: int, M: int, rng) -> SensingAssignment:
    """Baseline "Random": same channel choice as memoryless, error-oblivious sensing."""
    return assign_memoryless(N, M, rng)


def assign_negotiate(N: int, M: int, rng) -> SensingAssignment:
    """Baseline "Negotiate": users spread round-robin from a random offset.

    Channel loads differ by at most one and the heavier channels rotate
    uniformly from slot to slot.
    """
    if N < 1 or M < 1:
        raise ValueError("need N >= 1 and M >= 1")
    offset = rng.integers(0, M)
    return SensingAssignment((np.arange(N) + offset) % M, M)


def assign_improved(knowledge: ChannelKnowledge | None, N: int, M: int, K_bar: int,
                    rng) -> SensingAssignment:
    """Load-balancing reassignment from the previous slot's outcome."""
    if knowledge is None:
        return assign_memoryless(N, M, rng)
    prev = knowledge.prev_assignment
    new = prev.per_user.copy()
    to_b1_b2 = sorted(knowledge.b1 | knowledge.b2)
    to_b2 = sorted(knowledge.b2)
    for m in range(M):
        sensors = prev.sensors(m)
        if not sensors or knowledge.prev_stop_times[m] >= K_bar:
            continue
        # a lone sensor on an idle channel stays: moving it would leave that channel unsensed
        if m in knowledge.b0 and len(sensors) >= 2:
            mover = sensors[rng.integers(0, len(sensors))]
            choices = [m] + to_b1_b2
            new[mover] = choices[rng.integers(0, len(choices))]
        elif m in knowledge.b1:
            choices = [m] + to_b2
            for user in sensors:
                new[user] = choices[rng.integers(0, len(choices))]
    return SensingAssignment(new, M)


def prior_for(params: ChannelParams, kind: int) -> float:
    """One-step Markov prediction of Pr(idle) given what was learned last slot."""
    if kind == PRIOR_AFTER_IDLE:
        return params.lam
    if kind == PRIOR_AFTER_BUSY:
        return params.mu
    return params.zeta


def run_sensing_phase(assignment: SensingAssignment, true_states: Sequence[int],
                      channels: Sequence[ChannelParams], theta0: float, theta1: float,
                      K_bar: int, rng, mode: str = BAYESIAN,
                      priors: Sequence[float] | None = None) -> SensingPhaseResult:
    """Run the K_bar mini-slots of one slot for every channel.

    bayesian: the ``u`` sensors of a channel share results, so after
    mini-slot j the belief pools ``u * j`` observations; sensing stops at the
    first mini-slot whose verdict is no longer undecided.

    oblivious: one mini-slot, majority vote of the ``u`` results taken as the
    truth (ties count as idle).
    """
    M = len(channels)
    counts = assignment.counts
    if priors is None:
        priors = [c.zeta for c in channels]
    stop = np.zeros(M, dtype=np.int64)
    verdict = np.full(M, Verdict.UNSENSED, dtype=np.int8)
    beliefs = []
    for m in range(M):
        u = int(counts[m])
        c = channels[m]
        belief = BeliefState(channel=m, prior_idle=priors[m])
        beliefs.append(belief)
        if u == 0:
            continue
        q_zero = 1.0 - c.epsilon if true_states[m] == 0 else c.delta
        if mode == OBLIVIOUS:
            zeros = int(rng.binomial(u, q_zero))
            belief.k, belief.d = u, zeros
            verdict[m] = Verdict.IDLE if 2 * zeros >= u else Verdict.BUSY
            stop[m] = 1
            continue
        verdict[m] = Verdict.UNDECIDED
        for j in range(1, K_bar + 1):
            zeros = int(rng.binomial(u, q_zero))
            belief.update(zeros, u, c.epsilon, c.delta, theta0, theta1)
            if belief.verdict != Verdict.UNDECIDED:
                verdict[m] = belief.verdict
                stop[m] = j
                break
        else:
            stop[m] = K_bar
    return SensingPhaseResult(stop, verdict, beliefs)


def update_knowledge(assignment: SensingAssignment, sensing: SensingPhaseResult,
                     tx_result: Sequence[int]) -> ChannelKnowledge:
    """Classify channels into B0 / B1 / B2 for the next slot.

    ``tx_result[m]`` is -1 when no data was sent on ``m``, 0 when a data
    transmission succeeded (channel was idle) and 1 when it failed (busy).
    Transmission outcomes override the sensing belief.
    """
    M = assignment.num_channels
    b0, b1, b2 = set(), set(), set()
    for m in range(M):
        if tx_result[m] == 0:
            b0.add(m)
        elif tx_result[m] == 1:
            b1.add(m)
        elif sensing.verdict[m] == Verdict.IDLE:
            b0.add(m)
        elif sensing.verdict[m] == Verdict.BUSY:
            b1.add(m)
        else:
            b2.add(m)
    kind = np.full(M, PRIOR_STATIONARY, dtype=np.int8)
    kind[list(b0)] = PRIOR_AFTER_IDLE
    kind[list(b1)] = PRIOR_AFTER_BUSY
    return ChannelKnowledge(frozenset(b0), frozenset(b1), frozenset(b2), assignment,
                            sensing.stop_time.copy(), kind)
