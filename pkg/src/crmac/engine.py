"""Slot-by-slot protocol simulation.

Two implementations of the same slot procedure live here:

* ``run_slot`` composes the policy/estimator/access functions and returns a
  full ``SlotTrace``; it is the readable reference.
* ``_simulate`` is a compiled loop used for long runs. It consumes the
  protocol stream in the same order as ``run_slot``, so both produce the same
  trajectory from the same seeds (checked in the test suite).

Random streams per replication: child 0 of the replication's SeedSequence
drives the protocol (assignment, observations, contention) and child m+1
drives channel m, so channel sample paths do not depend on the scheme or on
how many channels exist.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats

from .access import Outcome, contend_case1, contend_case2
from .analytics import (NotApplicableError, assignment_distribution,
                        conditioned_assignment_distribution, tune_access_probability)
from .channel import ChannelStateVector, initial_states, sample_path
from .config import ScenarioConfig
from .estimator import Verdict, verdict_table
from .policies import (BAYESIAN, SCHEMES, ChannelKnowledge, SensingAssignment,
                       SensingPhaseResult, assign_improved, assign_memoryless, assign_negotiate,
                       assign_random, prior_for, run_sensing_phase, sensing_mode,
                       update_knowledge)

SCHEME_CODE = {name: i for i, name in enumerate(SCHEMES)}
PROPOSED = ("memoryless", "improved")


@dataclass
class SlotTrace:
    slot: int
    channels: ChannelStateVector
    assignment: SensingAssignment
    sensing: SensingPhaseResult
    outcomes: list                 # ContentionOutcome or None, per channel
    delivered_bits: np.ndarray
    pu_collision: np.ndarray


@dataclass
class SimState:
    channels: ChannelStateVector
    knowledge: ChannelKnowledge | None = None


def delivered_bits_table(config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Bits a successful transmission delivers: Case 1 by stop time, Case 2 flat."""
    K = config.K_bar
    case1 = np.zeros((config.M, K + 1))
    for m, c in enumerate(config.channels):
        for k in range(1, K + 1):
            case1[m, k] = c.rate * ((K - k) * config.T_ms + config.T_data)
    case2 = np.array([c.rate * config.T_data for c in config.channels])
    return case1, case2


def run_slot(state: SimState, scheme: str, case: int, config: ScenarioConfig, p: float,
             rng) -> SlotTrace:
    """Assignment, sensing, contention and accounting for the current slot.

    Updates ``state.knowledge`` (used by the improved policy); channel
    evolution is left to the caller.
    """
    N, M, K = config.N, config.M, config.K_bar
    s = state.channels.states
    if scheme == "memoryless":
        assignment = assign_memoryless(N, M, rng)
    elif scheme == "random":
        assignment = assign_random(N, M, rng)
    elif scheme == "negotiate":
        assignment = assign_negotiate(N, M, rng)
    elif scheme == "improved":
        assignment = assign_improved(state.knowledge, N, M, K, rng)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    priors = None
    if scheme == "improved" and state.knowledge is not None:
        priors = [prior_for(c, k) for c, k in zip(config.channels, state.knowledge.prior_kind)]
    sensing = run_sensing_phase(assignment, s, config.channels, config.theta0, config.theta1,
                                K, rng, mode=sensing_mode(scheme), priors=priors)

    case1_bits, case2_bits = delivered_bits_table(config)
    bits = np.zeros(M)
    collision = np.zeros(M, dtype=bool)
    tx_result = np.full(M, -1, dtype=np.int8)
    outcomes: list = [None] * M
    idle = sensing.idle_channels
    if case == 1:
        for m in idle:
            out = contend_case1(assignment.sensors(m), p, rng)
            outcomes[m] = out
            collision[m] = out.transmitters > 0 and s[m] == 1
            if out.kind == Outcome.SUCCESS:
                tx_result[m] = s[m]
                if s[m] == 0:
                    bits[m] = case1_bits[m, sensing.stop_time[m]]
    else:
        out = contend_case2(N, p, idle, rng)
        for m in idle:
            outcomes[m] = out
            if out.kind == Outcome.SUCCESS:
                tx_result[m] = s[m]
                collision[m] = s[m] == 1
                if s[m] == 0:
                    bits[m] = case2_bits[m]
    if scheme == "improved":
        state.knowledge = update_knowledge(assignment, sensing, tx_result)
    return SlotTrace(state.channels.slot_index, state.channels, assignment, sensing, outcomes,
                     bits, collision)


# -- compiled loop -----------------------------------------------------------------

@numba.njit(cache=True)
def _simulate(rng, states, scheme, case, p, N, K_bar, tables, q_idle, q_busy,
              bits1, bits2, record):
    T, M = states.shape
    bits_tot = np.zeros(M)
    busy_slots = np.zeros(M, dtype=np.int64)
    coll_slots = np.zeros(M, dtype=np.int64)
    counters = np.zeros(2, dtype=np.int64)  # unsensed, undecided channel-slots
    R = T if record else 1
    rec_counts = np.zeros((R, M), dtype=np.int16)
    rec_verdict = np.zeros((R, M), dtype=np.int8)
    rec_stop = np.zeros((R, M), dtype=np.int16)
    rec_bits = np.zeros((R, M))
    rec_coll = np.zeros((R, M), dtype=np.int8)
    rec_winner = np.full((R, M), -1, dtype=np.int16)

    per_user = np.zeros(N, dtype=np.int64)
    prev_user = np.zeros(N, dtype=np.int64)
    counts = np.zeros(M, dtype=np.int64)
    verdict = np.zeros(M, dtype=np.int8)
    stop = np.zeros(M, dtype=np.int64)
    b_class = np.zeros(M, dtype=np.int8)      # 0: B0, 1: B1, 2: B2
    prev_stop = np.zeros(M, dtype=np.int64)
    prior_kind = np.zeros(M, dtype=np.int64)
    tx_result = np.zeros(M, dtype=np.int8)
    pool = np.zeros(M, dtype=np.int64)
    have_prev = False

    for t in range(T):
        # assignment
        if scheme == 1:
            off = rng.integers(0, M)
            for i in range(N):
                per_user[i] = (i + off) % M
        elif scheme == 3 and have_prev:
            for i in range(N):
                prev_user[i] = per_user[i]
            for m in range(M):
                cnt = 0
                for i in range(N):
                    if prev_user[i] == m:
                        cnt += 1
                if cnt == 0 or prev_stop[m] >= K_bar:
                    continue
                if b_class[m] == 0 and cnt >= 2:  # lone sensor on an idle channel stays
                    npool = 0
                    for c in range(M):
                        if b_class[c] != 0:
                            pool[npool] = c
                            npool += 1
                    pick = rng.integers(0, cnt)
                    seen = 0
                    for i in range(N):
                        if prev_user[i] == m:
                            if seen == pick:
                                r = rng.integers(0, npool + 1)
                                per_user[i] = m if r == 0 else pool[r - 1]
                                break
                            seen += 1
                elif b_class[m] == 1:
                    npool = 0
                    for c in range(M):
                        if b_class[c] == 2:
                            pool[npool] = c
                            npool += 1
                    for i in range(N):
                        if prev_user[i] == m:
                            r = rng.integers(0, npool + 1)
                            per_user[i] = m if r == 0 else pool[r - 1]
        else:
            for i in range(N):
                per_user[i] = rng.integers(0, M)
        counts[:] = 0
        for i in range(N):
            counts[per_user[i]] += 1

        # sensing
        for m in range(M):
            u = counts[m]
            s = states[t, m]
            if u == 0:
                verdict[m] = 3
                stop[m] = 0
                counters[0] += 1
                continue
            q = q_idle[m] if s == 0 else q_busy[m]
            if scheme <= 1:
                d = rng.binomial(u, q)
                verdict[m] = 1 if 2 * d >= u else 2
                stop[m] = 1
                continue
            kind = prior_kind[m] if (scheme == 3 and have_prev) else 0
            D = 0
            verdict[m] = 0
            stop[m] = K_bar
            for j in range(1, K_bar + 1):
                D += rng.binomial(u, q)
                v = tables[m, kind, j * u, D]
                if v != 0:
                    verdict[m] = v
                    stop[m] = j
                    break
            if verdict[m] == 0:
                counters[1] += 1

        # contention and accounting
        tx_result[:] = -1
        if case == 1:
            for m in range(M):
                if verdict[m] != 1:
                    continue
                tx = 0
                winner = -1
                for i in range(N):
                    if per_user[i] == m and rng.random() < p:
                        tx += 1
                        winner = i
                s = states[t, m]
                if tx > 0 and s == 1:
                    coll_slots[m] += 1
                    if record:
                        rec_coll[t, m] = 1
                if tx == 1:
                    tx_result[m] = s
                    if record:
                        rec_winner[t, m] = winner
                    if s == 0:
                        bits_tot[m] += bits1[m, stop[m]]
                        if record:
                            rec_bits[t, m] = bits1[m, stop[m]]
        else:
            any_idle = False
            for m in range(M):
                if verdict[m] == 1:
                    any_idle = True
            if any_idle:
                tx = 0
                winner = -1
                for i in range(N):
                    if rng.random() < p:
                        tx += 1
                        winner = i
                if tx == 1:
                    for m in range(M):
                        if verdict[m] != 1:
                            continue
                        s = states[t, m]
                        tx_result[m] = s
                        if record:
                            rec_winner[t, m] = winner
                        if s == 1:
                            coll_slots[m] += 1
                            if record:
                                rec_coll[t, m] = 1
                        else:
                            bits_tot[m] += bits2[m]
                            if record:
                                rec_bits[t, m] = bits2[m]
        for m in range(M):
            busy_slots[m] += states[t, m]
            if record:
                rec_counts[t, m] = counts[m]
                rec_verdict[t, m] = verdict[m]
                rec_stop[t, m] = stop[m]

        # knowledge for the next slot (improved policy)
        if scheme == 3:
            for m in range(M):
                if tx_result[m] == 0 or (tx_result[m] == -1 and verdict[m] == 1):
                    b_class[m] = 0
                    prior_kind[m] = 1
                elif tx_result[m] == 1 or (tx_result[m] == -1 and verdict[m] == 2):
                    b_class[m] = 1
                    prior_kind[m] = 2
                else:
                    b_class[m] = 2
                    prior_kind[m] = 0
                prev_stop[m] = stop[m]
            have_prev = True

    return (bits_tot, busy_slots, coll_slots, counters,
            rec_counts, rec_verdict, rec_stop, rec_bits, rec_coll, rec_winner)


def verdict_tables(config: ScenarioConfig) -> np.ndarray:
    """Lookup ``[m, prior_kind, k, d]`` of verdicts, for the three possible priors."""
    max_k = config.N * config.K_bar
    out = np.zeros((config.M, 3, max_k + 1, max_k + 1), dtype=np.int8)
    for m, c in enumerate(config.channels):
        for kind in range(3):
            out[m, kind] = verdict_table(prior_for(c, kind), c.epsilon, c.delta,
                                         config.theta0, config.theta1, max_k)
    return out


def replication_streams(seed_seq: np.random.SeedSequence, M: int):
    """Protocol generator and one generator per channel for a replication."""
    children = [np.random.SeedSequence(seed_seq.entropy, spawn_key=seed_seq.spawn_key + (i,))
                for i in range(M + 1)]
    return np.random.default_rng(children[0]), [np.random.default_rng(c) for c in children[1:]]


def replication_seeds(seed: int, num_replications: int) -> list[np.random.SeedSequence]:
    return [np.random.SeedSequence(seed, spawn_key=(r,)) for r in range(num_replications)]


@dataclass
class ReplicationResult:
    num_slots: int
    bits: np.ndarray
    busy_slots: np.ndarray
    collision_slots: np.ndarray
    unsensed: int
    undecided: int
    records: dict = field(default_factory=dict)

    def throughput(self, config: ScenarioConfig) -> float:
        return float(self.bits.sum()) / (self.num_slots * config.T_s)

    def collision_per_channel(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.busy_slots > 0,
                            self.collision_slots / np.maximum(self.busy_slots, 1), np.nan)

    def primary_throughput(self, config: ScenarioConfig) -> float:
        rates = np.array([c.rate for c in config.channels])
        return float(rates @ (self.busy_slots - self.collision_slots)) / self.num_slots


def run_replication(config: ScenarioConfig, scheme: str, case: int, p: float, num_slots: int,
                    seed_seq: np.random.SeedSequence, record: bool = False) -> ReplicationResult:
    if scheme not in SCHEME_CODE:
        raise ValueError(f"unknown scheme {scheme!r}")
    if case not in (1, 2):
        raise ValueError(f"case must be 1 or 2, got {case}")
    protocol, chan_rngs = replication_streams(seed_seq, config.M)
    states = np.stack([sample_path(c, num_slots, r)
                       for c, r in zip(config.channels, chan_rngs)], axis=1)
    bits1, bits2 = delivered_bits_table(config)
    q_idle = np.array([1.0 - c.epsilon for c in config.channels])
    q_busy = np.array([c.delta for c in config.channels])
    out = _simulate(protocol, states, SCHEME_CODE[scheme], case, float(p), config.N,
                    config.K_bar, verdict_tables(config), q_idle, q_busy, bits1, bits2, record)
    bits, busy, coll, counters = out[:4]
    records = {}
    if record:
        names = ("counts", "verdict", "stop", "bits", "collision", "winner")
        records = dict(zip(names, out[4:]))
        records["states"] = states
    return ReplicationResult(num_slots, bits, busy, coll, int(counters[0]), int(counters[1]),
                             records)


def mean_ci(values, confidence: float = 0.95) -> tuple[float, float]:
    """Mean and Student-t confidence half-width across replications."""
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if len(x) == 0:
        return float("nan"), float("nan")
    if len(x) == 1:
        return float(x[0]), 0.0
    half = stats.t.ppf(0.5 + confidence / 2, len(x) - 1) * x.std(ddof=1) / np.sqrt(len(x))
    return float(x.mean()), float(half)


@dataclass
class AggregateMetrics:
    scheme: str
    case: int
    p: float
    num_slots: int
    throughput: np.ndarray              # per replication, bit/s
    collision: np.ndarray               # per replication, mean over channels
    collision_per_channel: np.ndarray   # (replications, M), nan where never busy
    primary_throughput: np.ndarray      # per replication, bit/s
    unsensed: np.ndarray                # channel-slots per replication
    undecided: np.ndarray

    @property
    def throughput_mean_ci(self):
        return mean_ci(self.throughput)

    @property
    def collision_mean_ci(self):
        return mean_ci(self.collision)

    @property
    def primary_throughput_mean_ci(self):
        return mean_ci(self.primary_throughput)

    @property
    def channel_collision_mean(self) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.nanmean(self.collision_per_channel, axis=0)


def access_probability(config: ScenarioConfig, scheme: str, case: int) -> float:
    """The p a scheme uses under ``config``.

    Proposed schemes: explicit ``config.p``, or tuned against the collision
    budgets (memoryless with the binomial assignment law, improved with the
    law conditioned on every channel being sensed). Baselines are not tuned:
    explicit ``config.baseline_p``, else the memoryless p for the same case.
    """
    if scheme in PROPOSED:
        if config.p != "auto":
            return float(config.p)
        assignment = None
        if scheme == "improved":
            try:
                assignment = conditioned_assignment_distribution(config.N, config.M)
            except NotApplicableError:
                assignment = assignment_distribution(config.N, config.M)
        return tune_access_probability(config, case, assignment=assignment)
    if config.baseline_p != "auto":
        return float(config.baseline_p)
    return access_probability(config, "memoryless", case)


def run_simulation(config: ScenarioConfig, scheme: str, case: int, num_slots: int | None = None,
                   num_replications: int | None = None, seed: int | None = None,
                   p: float | None = None) -> AggregateMetrics:
    """Independent replications with seeds derived from ``seed``."""
    num_slots = config.num_slots if num_slots is None else num_slots
    num_replications = config.num_replications if num_replications is None else num_replications
    seed = config.seed if seed is None else seed
    if num_slots < 1 or num_replications < 1:
        raise ValueError("need at least one slot and one replication")
    p = access_probability(config, scheme, case) if p is None else p
    reps = [run_replication(config, scheme, case, p, num_slots, ss)
            for ss in replication_seeds(seed, num_replications)]
    per_chan = np.array([r.collision_per_channel() for r in reps])
    with np.errstate(all="ignore"):
        coll = np.array([np.nanmean(row) if np.any(~np.isnan(row)) else np.nan
                         for row in per_chan])
    return AggregateMetrics(
        scheme=scheme, case=case, p=float(p), num_slots=num_slots,
        throughput=np.array([r.throughput(config) for r in reps]),
        collision=coll,
        collision_per_channel=per_chan,
        primary_throughput=np.array([r.primary_throughput(config) for r in reps]),
        unsensed=np.array([r.unsensed for r in reps]),
        undecided=np.array([r.undecided for r in reps]),
    )


def initial_state(config: ScenarioConfig, channel_rngs) -> SimState:
    return SimState(initial_states(config.channels, channel_rngs))
