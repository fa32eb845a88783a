"""Closed-form interference and throughput of the sensing-error-aware MAC.

All aggregate quantities are reduced to per-channel marginals: channel
states are independent and the throughput sum is linear in channels, so the
joint sums over assignment vectors and state vectors collapse to
``sum_m zeta_m sum_u Pr(U_m = u) (...)``. ``omega_joint`` keeps the literal
joint-vector form for small instances as a cross-check.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .access import contention_probabilities
from .channel import ChannelParams
from .config import ScenarioConfig
from .estimator import Verdict, classify_belief, posterior_idle


class NotApplicableError(ValueError):
    pass


@dataclass(frozen=True)
class StopTimeDistribution:
    """Stop-time law of one channel given ``u`` sensors and its true state.

    ``idle[k-1]`` is Pr(K = k, verdict idle), ``busy[k-1]`` the same for a
    busy verdict, ``undecided`` the mass still undecided after K_bar mini-slots.
    """

    idle: np.ndarray
    busy: np.ndarray
    undecided: float

    @property
    def probs(self) -> np.ndarray:
        return self.idle

    @property
    def residual(self) -> float:
        """Mass of never reaching an idle verdict (busy verdict or undecided)."""
        return 1.0 - float(self.idle.sum())


# -- assignment distributions ------------------------------------------------

def assignment_distribution(N: int, M: int) -> np.ndarray:
    """Pr(U_m = u), u = 0..N, when every user picks a channel uniformly."""
    if N < 1 or M < 1:
        raise ValueError("need N >= 1 and M >= 1")
    q = 1.0 / M
    return np.array([math.comb(N, u) * q ** u * (1 - q) ** (N - u) for u in range(N + 1)])


def compositions(total: int, parts: int):
    """All tuples of ``parts`` positive integers summing to ``total``."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        bounds = (0,) + cuts + (total,)
        yield tuple(b - a for a, b in zip(bounds, bounds[1:]))


def conditioned_assignment_distribution(N: int, M: int) -> np.ndarray:
    """Pr(U_m = u | every channel has at least one sensor), u = 0..N.

    Enumerates the compositions of N into M positive parts, weighted by the
    multinomial law of independent uniform choices.
    """
    if N < M:
        raise NotApplicableError(f"N={N} < M={M}: some channel is always unsensed")
    marg = np.zeros(N + 1)
    log_base = math.lgamma(N + 1) - N * math.log(M)
    for comp in compositions(N, M):
        w = math.exp(log_base - sum(math.lgamma(c + 1) for c in comp))
        marg[comp[0]] += w
    return marg / marg.sum()


# -- stop-time distributions -------------------------------------------------

def _binomial_weights(u: int, q: float) -> np.ndarray:
    return np.array([math.comb(u, i) * q ** i * (1 - q) ** (u - i) for i in range(u + 1)])


@functools.lru_cache(maxsize=4096)
def _stop_time_cached(u, s, epsilon, delta, prior, theta0, theta1, K_bar):
    q_zero = 1.0 - epsilon if s == 0 else delta
    w = _binomial_weights(u, q_zero)
    idle = np.zeros(K_bar)
    busy = np.zeros(K_bar)
    alive = np.ones(1)  # mass over the cumulative zero count, still undecided
    for j in range(1, K_bar + 1):
        mass = np.convolve(alive, w)
        k = j * u
        for D in range(len(mass)):
            if mass[D] == 0.0:
                continue
            v = classify_belief(posterior_idle(prior, D, k, epsilon, delta), theta0, theta1)
            if v == Verdict.IDLE:
                idle[j - 1] += mass[D]
                mass[D] = 0.0
            elif v == Verdict.BUSY:
                busy[j - 1] += mass[D]
                mass[D] = 0.0
        alive = mass
    idle.flags.writeable = False
    busy.flags.writeable = False
    return StopTimeDistribution(idle, busy, float(alive.sum()))


def stop_time_distribution(u: int, s: int, params: ChannelParams, prior_idle: float,
                           theta0: float, theta1: float, K_bar: int) -> StopTimeDistribution:
    """Law of the stop time for ``u >= 1`` pooled sensors and true state ``s``.

    Forward recursion over (mini-slot, cumulative zero count): the mass that
    is still undecided after mini-slot j is convolved with the Binomial(u, q)
    count of idle reports in mini-slot j+1, where q = 1 - epsilon on an idle
    channel and q = delta on a busy one.
    """
    if u < 1:
        raise ValueError("stop time needs at least one sensor")
    return _stop_time_cached(int(u), int(s), float(params.epsilon), float(params.delta),
                             float(prior_idle), float(theta0), float(theta1), int(K_bar))


def stop_time_bruteforce(u: int, s: int, params: ChannelParams, prior_idle: float,
                         theta0: float, theta1: float, K_bar: int) -> StopTimeDistribution:
    """Literal nested sum over every sequence of per-mini-slot idle-report counts.

    Exponential in K_bar; meant as an oracle for small ``u`` and ``K_bar``.
    """
    q = 1.0 - params.epsilon if s == 0 else params.delta
    idle = np.zeros(K_bar)
    busy = np.zeros(K_bar)
    undecided = 0.0
    for seq in itertools.product(range(u + 1), repeat=K_bar):
        weight = 1.0
        for d in seq:
            weight *= math.comb(u, d) * q ** d * (1 - q) ** (u - d)
        D = 0
        for j, d in enumerate(seq, start=1):
            D += d
            a = posterior_idle(prior_idle, D, j * u, params.epsilon, params.delta)
            v = classify_belief(a, theta0, theta1)
            if v == Verdict.IDLE:
                idle[j - 1] += weight
                break
            if v == Verdict.BUSY:
                busy[j - 1] += weight
                break
        else:
            undecided += weight
    return StopTimeDistribution(idle, busy, undecided)


# -- interference, throughput, tuning -------------------------------------------

def _priors(config: ScenarioConfig, priors) -> list[float]:
    return [c.zeta for c in config.channels] if priors is None else list(priors)


def _false_idle(config: ScenarioConfig, m: int, u: int, prior: float) -> float:
    c = config.channels[m]
    return float(stop_time_distribution(u, 1, c, prior, config.theta0, config.theta1,
                                        config.K_bar).idle.sum())


def interference_probability(config: ScenarioConfig, case: int, p: float,
                             priors: Sequence[float] | None = None,
                             assignment: np.ndarray | None = None) -> np.ndarray:
    """Pr(secondary transmission on channel m | channel m busy), per channel.

    Case 1 uses the per-channel access factor P_succ(u) + P_coll(u) = 1 - (1-p)^u;
    Case 2 the control-channel success probability N p (1-p)^(N-1).
    """
    N, M = config.N, config.M
    pu = assignment_distribution(N, M) if assignment is None else assignment
    priors = _priors(config, priors)
    out = np.zeros(M)
    p_succ_all = contention_probabilities(N, p)[1]
    for m in range(M):
        total = 0.0
        for u in range(1, N + 1):
            if pu[u] == 0.0:
                continue
            access = 1.0 - (1.0 - p) ** u if case == 1 else p_succ_all
            total += _false_idle(config, m, u, priors[m]) * pu[u] * access
        out[m] = total
    return out


def _channel_terms(config: ScenarioConfig, case: int, priors) -> np.ndarray:
    """Lambda^case_m(u) in bit/s, shape (M, N+1); zero for u = 0."""
    N, M, K = config.N, config.M, config.K_bar
    lam = np.zeros((M, N + 1))
    if case == 1:
        airtime = np.array([(K - k) * config.T_ms + config.T_data for k in range(1, K + 1)])
    else:
        airtime = np.full(K, config.T_data)
    for m, c in enumerate(config.channels):
        for u in range(1, N + 1):
            st = stop_time_distribution(u, 0, c, priors[m], config.theta0, config.theta1, K)
            lam[m, u] = c.rate * float(st.idle @ airtime) / config.T_s
    return lam


@dataclass(frozen=True)
class ThroughputResult:
    per_channel_terms: np.ndarray   # Lambda_m(u), shape (M, N+1)
    per_channel: np.ndarray         # contribution of each channel to omega
    omega: float


def _throughput(config, case, p, priors, assignment) -> ThroughputResult:
    N, M = config.N, config.M
    pu = assignment_distribution(N, M) if assignment is None else np.asarray(assignment)
    priors = _priors(config, priors)
    lam = _channel_terms(config, case, priors)
    if case == 1:
        succ = np.array([contention_probabilities(u, p)[1] for u in range(N + 1)])
    else:
        succ = np.full(N + 1, contention_probabilities(N, p)[1])
    zeta = np.array([c.zeta for c in config.channels])
    per_channel = np.array([math.fsum(pu * lam[m] * succ) for m in range(M)]) * zeta
    return ThroughputResult(lam, per_channel, math.fsum(per_channel))


def throughput_case1(config: ScenarioConfig, p: float, priors=None,
                     assignment=None) -> ThroughputResult:
    """Omega_1: per-channel contention, the winner uses the rest of the sensing phase too."""
    return _throughput(config, 1, p, priors, assignment)


def throughput_case2(config: ScenarioConfig, p: float, priors=None,
                     assignment=None) -> ThroughputResult:
    """Omega_2: one control-channel winner takes every idle channel for T_data."""
    return _throughput(config, 2, p, priors, assignment)


def throughput(config: ScenarioConfig, case: int, p: float, priors=None,
               assignment=None) -> ThroughputResult:
    return _throughput(config, case, p, priors, assignment)


def multinomial_vectors(N: int, M: int):
    """Every assignment count vector with its multinomial probability."""
    log_base = math.lgamma(N + 1) - N * math.log(M)
    for cuts in itertools.combinations(range(N + M - 1), M - 1):
        bounds = (-1,) + cuts + (N + M - 1,)
        vec = tuple(b - a - 1 for a, b in zip(bounds, bounds[1:]))
        yield vec, math.exp(log_base - sum(math.lgamma(v + 1) for v in vec))


def omega_joint(config: ScenarioConfig, case: int, p: float, priors=None) -> float:
    """Throughput as the literal triple sum over assignment vectors, state vectors, channels.

    Exponential in M; for cross-checking the marginal form on small instances.
    """
    N, M = config.N, config.M
    priors = _priors(config, priors)
    lam = _channel_terms(config, case, priors)
    zeta = [c.zeta for c in config.channels]
    total = 0.0
    for vec, pv in multinomial_vectors(N, M):
        for states in itertools.product((0, 1), repeat=M):
            ps = math.prod(zeta[m] if s == 0 else 1 - zeta[m] for m, s in enumerate(states))
            for m in range(M):
                if states[m] != 0:
                    continue
                u = vec[m]
                succ = contention_probabilities(u if case == 1 else N, p)[1]
                total += pv * ps * lam[m, u] * succ
    return total


def tune_access_probability(config: ScenarioConfig, case: int,
                            gammas: Sequence[float] | None = None, priors=None,
                            assignment=None, tol: float = 1e-10) -> float:
    """Access probability p that respects Pr(interference) <= gamma_m on every channel.

    Case 1: the largest feasible p (interference grows monotonically with p),
    by bisection. Case 2: the p on the grid 0.001, 0.002, ..., 1 maximizing
    Omega_2 among feasible values, since N p (1-p)^(N-1) is not monotone.
    """
    gammas = [c.gamma for c in config.channels] if gammas is None else list(gammas)
    if any(g < 0 for g in gammas):
        raise ValueError("gamma must be nonnegative")
    g = np.asarray(gammas)

    def feasible(p):
        return bool(np.all(interference_probability(config, case, p, priors, assignment) <= g))

    if case == 1:
        if feasible(1.0):
            return 1.0
        if not feasible(tol):
            return 0.0
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        return lo
    # Omega_2 is proportional to P_succ(N); interference scales with it too
    base_intf = interference_probability(config, 2, 1.0 / config.N, priors, assignment)
    base_succ = contention_probabilities(config.N, 1.0 / config.N)[1]
    best_p, best_succ = 0.0, -1.0
    for i in range(1, 1001):
        p = i / 1000
        succ = contention_probabilities(config.N, p)[1]
        if np.all(base_intf * (succ / base_succ) <= g + 1e-15) and succ > best_succ:
            best_p, best_succ = p, succ
    return best_p


def improved_policy_throughput_bound(config: ScenarioConfig, case: int, p: float,
                                     priors=None) -> ThroughputResult:
    """Throughput with the assignment law conditioned on every channel being sensed."""
    cond = conditioned_assignment_distribution(config.N, config.M)
    return _throughput(config, case, p, priors, cond)
