"""p-persistent contention for the transmission phase.

Case 1: the sensors of each idle-verdict channel contend on that channel.
Case 2: all users contend once on the control channel; the winner bonds
every idle-verdict channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable


class Outcome(IntEnum):
    NO_TRANSMISSION = 0
    SUCCESS = 1
    COLLISION = 2


@dataclass(frozen=True)
class ContentionOutcome:
    kind: Outcome
    winner: int | None = None
    transmitters: int = 0

    def __post_init__(self):
        if (self.kind == Outcome.SUCCESS) != (self.winner is not None):
            raise ValueError("a winner is present exactly when the contention succeeds")


@dataclass(frozen=True)
class AccessConfig:
    p: float
    case: int = 1

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} is not a probability")
        if self.case not in (1, 2):
            raise ValueError(f"case must be 1 or 2, got {self.case}")


def _contend(users: Iterable[int], p: float, rng) -> ContentionOutcome:
    sent = [u for u in users if rng.random() < p]
    if not sent:
        return ContentionOutcome(Outcome.NO_TRANSMISSION)
    if len(sent) == 1:
        return ContentionOutcome(Outcome.SUCCESS, sent[0], 1)
    return ContentionOutcome(Outcome.COLLISION, None, len(sent))


def contend_case1(contenders: Iterable[int], p: float, rng) -> ContentionOutcome:
    """Each contender sends an RTS on the channel independently with probability p."""
    return _contend(sorted(contenders), p, rng)


def contend_case2(N: int, p: float, idle_set, rng) -> ContentionOutcome:
    """One control-channel contention among all N users for the whole idle set.

    No contention happens when nothing was found idle.
    """
    if not idle_set:
        return ContentionOutcome(Outcome.NO_TRANSMISSION)
    return _contend(range(N), p, rng)


def contention_probabilities(u: int, p: float) -> tuple[float, float, float]:
    """``(p_idle, p_succ, p_coll)`` for ``u`` users each sending with probability ``p``."""
    if u < 0:
        raise ValueError("u must be nonnegative")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} is not a probability")
    p_idle = (1.0 - p) ** u
    p_succ = u * p * (1.0 - p) ** (u - 1) if u > 0 else 0.0
    return p_idle, p_succ, max(0.0, 1.0 - p_idle - p_succ)
