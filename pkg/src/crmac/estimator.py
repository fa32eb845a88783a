"""Noisy per-mini-slot observations and the pooled Bayesian availability estimate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Verdict(IntEnum):
    UNDECIDED = 0
    IDLE = 1
    BUSY = 2
    UNSENSED = 3


def sample_observation(true_state: int, epsilon: float, delta: float, rng) -> int:
    """One sensing result: 1 means "busy" was reported."""
    if true_state == 0:
        return int(rng.random() < epsilon)
    return 0 if rng.random() < delta else 1


def log_odds_idle(prior_idle: float, d: int, k: int, epsilon: float, delta: float) -> float:
    """log(a / (1 - a)) for the pooled estimate; affine in d and k.

    Needs 0 < prior_idle < 1. Unlike ``a`` itself it
    does not saturate in floating point, so it keeps strict monotonicity
    visible for long observation runs.
    """
    if not 0 <= d <= k:
        raise ValueError(f"need 0 <= d <= k, got d={d}, k={k}")
    # log of Pr(obs | idle) / Pr(obs | busy); empty terms skipped so a zero
    # error rate only matters when the matching observation actually occurred
    x = math.log(prior_idle) - math.log1p(-prior_idle)
    if d:
        x += d * (math.log1p(-epsilon) - math.log(delta))
    if k - d:
        x += (k - d) * (math.log(epsilon) - math.log1p(-delta))
    return x


def posterior_idle(prior_idle: float, d: int, k: int, epsilon: float, delta: float) -> float:
    """Pr(idle | k pooled observations of which ``d`` reported idle).

    Only the counts matter, not the order of the observations. Zero error
    rates are handled as limits: with a perfect detector (delta = 0) any idle
    report proves the channel idle, with no false alarms (epsilon = 0) any
    busy report proves it busy.
    """
    if not 0 <= d <= k:
        raise ValueError(f"need 0 <= d <= k, got d={d}, k={k}")
    if prior_idle <= 0.0 or prior_idle >= 1.0:
        return float(prior_idle)
    proves_idle = d > 0 and delta == 0.0
    proves_busy = k - d > 0 and epsilon == 0.0
    if proves_idle and proves_busy:
        raise ValueError("observations are impossible under both channel states")
    if proves_idle:
        return 1.0
    if proves_busy:
        return 0.0
    x = log_odds_idle(prior_idle, d, k, epsilon, delta)
    if x < -700.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(-x))


def classify_belief(a: float, theta0: float, theta1: float) -> Verdict:
    """Both thresholds are inclusive: a <= theta0 is busy, a >= theta1 is idle."""
    if not 0.0 < theta0 < theta1 < 1.0:
        raise ValueError(f"thresholds must satisfy 0 < theta0 < theta1 < 1 (got {theta0}, {theta1})")
    if a <= theta0:
        return Verdict.BUSY
    if a >= theta1:
        return Verdict.IDLE
    return Verdict.UNDECIDED


@dataclass
class BeliefState:
    channel: int
    prior_idle: float
    k: int = 0
    d: int = 0
    a: float = float("nan")
    verdict: Verdict = Verdict.UNDECIDED

    def __post_init__(self):
        if np.isnan(self.a):
            self.a = self.prior_idle

    def update(self, zeros: int, total: int, epsilon: float, delta: float,
               theta0: float, theta1: float) -> "BeliefState":
        """Pool ``total`` more observations, ``zeros`` of which reported idle."""
        self.k += total
        self.d += zeros
        self.a = posterior_idle(self.prior_idle, self.d, self.k, epsilon, delta)
        self.verdict = classify_belief(self.a, theta0, theta1)
        return self


@dataclass(frozen=True)
class DecisionSets:
    psi0: frozenset
    psi1: frozenset
    psi2: frozenset


def enumerate_decision_sets(k: int, prior_idle: float, epsilon: float, delta: float,
                            theta0: float, theta1: float) -> DecisionSets:
    """Split d = 0..k into busy / idle / undecided zero-counts."""
    sets = {Verdict.BUSY: set(), Verdict.IDLE: set(), Verdict.UNDECIDED: set()}
    for d in range(k + 1):
        v = classify_belief(posterior_idle(prior_idle, d, k, epsilon, delta), theta0, theta1)
        sets[v].add(d)
    return DecisionSets(frozenset(sets[Verdict.BUSY]), frozenset(sets[Verdict.IDLE]),
                        frozenset(sets[Verdict.UNDECIDED]))


def verdict_table(prior_idle: float, epsilon: float, delta: float, theta0: float,
                  theta1: float, max_k: int) -> np.ndarray:
    """``table[k, d]`` = verdict after ``k`` pooled observations with ``d`` zeros.

    Entries with d > k are unused and left UNDECIDED.
    """
    table = np.zeros((max_k + 1, max_k + 1), dtype=np.int8)
    for k in range(max_k + 1):
        for d in range(k + 1):
            a = posterior_idle(prior_idle, d, k, epsilon, delta)
            table[k, d] = classify_belief(a, theta0, theta1)
    return table
