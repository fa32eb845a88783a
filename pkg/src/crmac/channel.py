"""Two-state discrete-time Markov channels (0 = idle, 1 = busy)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

IDLE = 0
BUSY = 1


class DegenerateChannelError(ValueError):
    """The chain has no unique stationary distribution."""


@dataclass(frozen=True)
class ChannelParams:
    """Per-channel primary traffic, radio and sensor parameters.

    ``lam`` is Pr(idle -> idle) and ``mu`` is Pr(busy -> idle).
    """

    lam: float
    mu: float
    rate: float = 1e6
    gamma: float = 0.035
    epsilon: float = 0.3
    delta: float = 0.3

    def __post_init__(self):
        for name in ("lam", "mu", "gamma", "epsilon", "delta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        if not self.rate > 0:
            raise ValueError(f"rate={self.rate} must be positive")
        # 0.5 itself is allowed so that the 0.1..0.5 error sweeps are representable;
        # posterior monotonicity only needs epsilon + delta < 1.
        if self.epsilon > 0.5 or self.delta > 0.5:
            raise ValueError(
                f"sensing errors must not exceed 0.5 (epsilon={self.epsilon}, delta={self.delta})")
        if self.epsilon + self.delta >= 1.0:
            raise ValueError("epsilon + delta must be below 1")

    @property
    def eta(self) -> float:
        return stationary_probabilities(self)[0]

    @property
    def zeta(self) -> float:
        return stationary_probabilities(self)[1]

    @classmethod
    def from_utilization(cls, eta: float, correlation: float = 0.0, **kw) -> "ChannelParams":
        """Build a chain with busy probability ``eta`` and lag-one correlation ``lam - mu``.

        ``correlation = 0`` gives i.i.d. slots (lam = mu = 1 - eta).
        """
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta={eta} is not a probability")
        if not -1.0 < correlation < 1.0:
            raise ValueError(f"correlation={correlation} must lie in (-1, 1)")
        lam = 1.0 - eta * (1.0 - correlation)
        mu = (1.0 - eta) * (1.0 - correlation)
        return cls(lam=lam, mu=mu, **kw)

    @classmethod
    def from_lambda(cls, eta: float, lam: float, **kw) -> "ChannelParams":
        """Solve the stationary equation for ``mu`` given ``eta`` and ``lam``."""
        if not 0.0 < eta <= 1.0:
            raise ValueError(f"eta={eta} must lie in (0, 1] when lambda is fixed")
        mu = (1.0 - lam) * (1.0 - eta) / eta
        if mu > 1.0:
            raise ValueError(f"eta={eta} is unreachable with lambda={lam} (mu={mu:.4g} > 1)")
        return cls(lam=lam, mu=mu, **kw)


@dataclass
class ChannelStateVector:
    states: np.ndarray
    slot_index: int = 0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int8)
        if self.states.ndim != 1 or np.any((self.states != IDLE) & (self.states != BUSY)):
            raise ValueError("channel states must be a 1-d vector of 0/1")

    def __len__(self):
        return len(self.states)


def stationary_probabilities(params: ChannelParams) -> tuple[float, float]:
    """Return ``(eta, zeta)``: long-run busy and idle probabilities."""
    denom = 1.0 - params.lam + params.mu
    if denom == 0.0:
        raise DegenerateChannelError(
            "no unique stationary distribution (lambda=1, mu=0: both states absorbing)")
    eta = (1.0 - params.lam) / denom
    return eta, 1.0 - eta


def _next_state(state: int, u: float, params: ChannelParams) -> int:
    stay_idle = params.lam if state == IDLE else params.mu
    return IDLE if u < stay_idle else BUSY


def initial_states(params_per_channel: Sequence[ChannelParams], rngs) -> ChannelStateVector:
    """Draw each channel from its stationary distribution using its own stream."""
    states = [IDLE if rng.random() < p.zeta else BUSY
              for p, rng in zip(params_per_channel, rngs)]
    return ChannelStateVector(np.array(states, dtype=np.int8), 0)


def step_channels(current: ChannelStateVector, params_per_channel: Sequence[ChannelParams],
                  rng) -> ChannelStateVector:
    """Advance every channel one slot.

    ``rng`` is either a single generator or one generator per channel; the
    simulator uses the latter so channel paths do not depend on ``M``.
    """
    if len(params_per_channel) != len(current):
        raise ValueError("need one ChannelParams per channel")
    rngs = rng if isinstance(rng, (list, tuple)) else [rng] * len(current)
    new = np.array([_next_state(int(s), r.random(), p)
                    for s, p, r in zip(current.states, params_per_channel, rngs)], dtype=np.int8)
    return ChannelStateVector(new, current.slot_index + 1)


def sample_path(params: ChannelParams, num_slots: int, rng) -> np.ndarray:
    """Stationary sample path of one channel, ``num_slots`` long.

    Consumes the stream exactly like ``initial_states`` followed by repeated
    ``step_channels`` calls on the same generator, so both give the same path.
    """
    u = rng.random(num_slots)
    path = np.empty(num_slots, dtype=np.int8)
    if num_slots == 0:
        return path
    path[0] = IDLE if u[0] < params.zeta else BUSY
    # A transition is forced whenever both rows of the transition matrix agree;
    # otherwise the chain keeps its previous state (lam >= mu) or flips it (lam < mu).
    busy_from_idle = u[1:] >= params.lam
    busy_from_busy = u[1:] >= params.mu
    forced = busy_from_idle == busy_from_busy
    if params.lam >= params.mu:
        # forward-fill the forced values over the "keep" positions
        vals = np.where(forced, busy_from_idle, False).astype(np.int8)
        idx = np.where(forced, np.arange(1, num_slots), 0)
        np.maximum.accumulate(idx, out=idx)
        path[1:] = np.where(idx > 0, vals[idx - 1], path[0])
    else:
        # flips depend on the whole history; small loop is fine here
        s = int(path[0])
        for t in range(1, num_slots):
            s = _next_state(s, u[t], params)
            path[t] = s
    return path
