"""Scenario configuration: INI-style key/value file with per-channel sections.

Layout::

    [scenario]
    M = 5
    N = 8
    K_bar = 5
    T_ms = 9e-6
    T_s = 1.89e-3          ; or T_data (T_s = K_bar * T_ms + T_data)
    theta0 = 0.2
    theta1 = 0.8
    schemes = random, negotiate, memoryless, improved
    cases = 1, 2
    p = auto               ; or a number in [0, 1]
    baseline_p = auto      ; auto = same p as memoryless in baseline_case
    baseline_case = 1
    num_slots = 100000
    num_replications = 10
    seed = 2011

    [channels]             ; defaults shared by every channel
    rate = 1e6
    epsilon = 0.3
    delta = 0.3
    gamma = 0.035
    eta = 0.3
    correlation = 0        ; lambda - mu; 0 means i.i.d. slots

    [channel.3]            ; 1-based per-channel overrides
    epsilon = 0.2

A channel's Markov chain is fixed by ``lambda`` and ``mu`` when both are
given; by ``eta`` and ``lambda`` (mu solved from the stationary equation);
or by ``eta`` and ``correlation`` (lambda = 1 - eta (1 - c), mu = (1 - eta)(1 - c)).
"""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

from .channel import ChannelParams
from .policies import SCHEMES


class ConfigError(ValueError):
    """Invalid or incomplete scenario configuration; message names the field."""


@dataclass(frozen=True)
class ScenarioConfig:
    M: int = 5
    N: int = 8
    K_bar: int = 5
    T_ms: float = 9e-6
    T_data: float = 1.89e-3 - 5 * 9e-6
    theta0: float = 0.2
    theta1: float = 0.8
    channels: tuple = field(default_factory=tuple)
    schemes: tuple = SCHEMES
    cases: tuple = (1, 2)
    p: float | str = "auto"
    baseline_p: float | str = "auto"
    baseline_case: int = 1
    num_slots: int = 100_000
    num_replications: int = 10
    seed: int = 2011

    def __post_init__(self):
        if not self.channels:
            object.__setattr__(self, "channels", tuple(
                ChannelParams.from_utilization(0.3) for _ in range(self.M)))
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "cases", tuple(int(c) for c in self.cases))
        for name in ("M", "N", "K_bar", "num_slots", "num_replications"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"scenario.{name}: must be a positive integer")
        if len(self.channels) != self.M:
            raise ConfigError(f"channels: expected {self.M} channels, got {len(self.channels)}")
        if self.T_ms < 0 or self.T_data <= 0:
            raise ConfigError("scenario.T_ms/scenario.T_data: durations must be positive")
        if not (0.0 < self.theta0 < 1.0 and 0.0 < self.theta1 < 1.0):
            raise ConfigError("scenario.theta0/scenario.theta1: thresholds must lie in (0, 1)")
        if self.theta0 >= self.theta1:
            raise ConfigError(f"scenario.theta0/scenario.theta1: theta0 ({self.theta0}) "
                              f"must be below theta1 ({self.theta1})")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"scenario.schemes: unknown scheme {s!r}")
        for c in self.cases + (self.baseline_case,):
            if c not in (1, 2):
                raise ConfigError(f"scenario.cases: case must be 1 or 2, got {c}")
        for name in ("p", "baseline_p"):
            v = getattr(self, name)
            if v != "auto" and not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
                raise ConfigError(f"scenario.{name}: must be 'auto' or a probability, got {v!r}")

    @property
    def T_s(self) -> float:
        return self.K_bar * self.T_ms + self.T_data

    @property
    def upper_bound(self) -> float:
        """Idle capacity sum_m zeta_m R_m in bit/s."""
        return sum(c.zeta * c.rate for c in self.channels)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def with_channels(self, **changes) -> "ScenarioConfig":
        """Apply the same field change to every channel.

        ``eta`` is special: each chain keeps its correlation ``lam - mu``.
        """
        eta = changes.pop("eta", None)
        chans = []
        for c in self.channels:
            if eta is not None:
                kw = {k: getattr(c, k) for k in ("rate", "gamma", "epsilon", "delta")}
                kw.update(changes)
                try:
                    c = ChannelParams.from_utilization(eta, correlation=c.lam - c.mu, **kw)
                except ValueError as exc:
                    raise ConfigError(f"channels.eta: {exc}") from None
            else:
                try:
                    c = dataclasses.replace(c, **changes)
                except ValueError as exc:
                    raise ConfigError(f"channels: {exc}") from None
            chans.append(c)
        return self.replace(channels=tuple(chans))


def reference_scenario() -> ScenarioConfig:
    """Reference scenario: M=5, N=8, K_bar=5, T_ms=9us, T_s=1.89ms, eta=eps=delta=0.3."""
    return ScenarioConfig()


_SCENARIO_INT = ("M", "N", "K_bar", "num_slots", "num_replications", "seed", "baseline_case")
_SCENARIO_FLOAT = ("T_ms", "T_data", "theta0", "theta1")
_CHANNEL_KEYS = ("rate", "epsilon", "delta", "gamma", "eta", "lambda", "mu", "correlation")


def _num(section: str, key: str, raw: str, kind=float):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {kind.__name__}") from None


def _prob_or_auto(section, key, raw):
    raw = raw.strip()
    return "auto" if raw.lower() == "auto" else _num(section, key, raw)


def _channel(index: int, values: dict) -> ChannelParams:
    sec = f"channel.{index + 1}"
    missing = [k for k in ("rate", "epsilon", "delta", "gamma") if k not in values]
    if missing:
        raise ConfigError(f"{sec}.{missing[0]}: missing field")
    kw = {k: values[k] for k in ("rate", "epsilon", "delta", "gamma")}
    try:
        if "lambda" in values and "mu" in values:
            ch = ChannelParams(lam=values["lambda"], mu=values["mu"], **kw)
            if "eta" in values and abs(ch.eta - values["eta"]) > 1e-9:
                raise ConfigError(f"{sec}.eta: {values['eta']} disagrees with lambda/mu "
                                  f"(stationary eta = {ch.eta:.6g})")
            return ch
        if "eta" in values and "lambda" in values:
            return ChannelParams.from_lambda(values["eta"], values["lambda"], **kw)
        if "eta" in values:
            return ChannelParams.from_utilization(values["eta"], values.get("correlation", 0.0),
                                                  **kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{sec}: {exc}") from None
    raise ConfigError(f"{sec}.eta: missing field (give eta, or lambda and mu)")


def parse_config(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    if "scenario" not in cp:
        raise ConfigError("scenario: missing section")
    sc = cp["scenario"]
    kw: dict = {}
    for key in _SCENARIO_INT:
        if key in sc:
            kw[key] = _num("scenario", key, sc[key], int)
    for key in _SCENARIO_FLOAT:
        if key in sc:
            kw[key] = _num("scenario", key, sc[key])
    if "T_s" in sc:
        t_s = _num("scenario", "T_s", sc["T_s"])
        k_bar = kw.get("K_bar", ScenarioConfig.K_bar)
        t_ms = kw.get("T_ms", ScenarioConfig.T_ms)
        t_data = t_s - k_bar * t_ms
        if "T_data" in kw and abs(kw["T_data"] - t_data) > 1e-12:
            raise ConfigError(f"scenario.T_s: {t_s} != K_bar*T_ms + T_data ({k_bar * t_ms + kw['T_data']})")
        kw["T_data"] = t_data
    for key in ("schemes", "cases"):
        if key in sc:
            items = [s.strip() for s in sc[key].split(",") if s.strip()]
            kw[key] = tuple(_num("scenario", key, s, int) for s in items) if key == "cases" \
                else tuple(items)
    for key in ("p", "baseline_p"):
        if key in sc:
            kw[key] = _prob_or_auto("scenario", key, sc[key])
    unknown = set(sc) - set(_SCENARIO_INT) - set(_SCENARIO_FLOAT) - {"T_s", "schemes", "cases",
                                                                     "p", "baseline_p"}
    if unknown:
        raise ConfigError(f"scenario.{sorted(unknown)[0]}: unknown field")

    M = kw.get("M", ScenarioConfig.M)
    shared = {}
    if "channels" in cp:
        for key, raw in cp["channels"].items():
            if key not in _CHANNEL_KEYS:
                raise ConfigError(f"channels.{key}: unknown field")
            shared[key] = _num("channels", key, raw)
    per_channel = [dict(shared) for _ in range(M)]
    for name in cp.sections():
        if not name.startswith("channel."):
            if name not in ("scenario", "channels"):
                raise ConfigError(f"{name}: unknown section")
            continue
        idx = _num(name, "index", name.split(".", 1)[1], int)
        if not 1 <= idx <= M:
            raise ConfigError(f"{name}: channel index outside 1..{M}")
        vals = per_channel[idx - 1]
        for key, raw in cp[name].items():
            if key not in _CHANNEL_KEYS:
                raise ConfigError(f"{name}.{key}: unknown field")
            vals[key] = _num(name, key, raw)
        # an explicit eta override must not be shadowed by inherited lambda/mu
        if "eta" in cp[name] and not ("lambda" in cp[name] or "mu" in cp[name]):
            vals.pop("lambda", None)
            vals.pop("mu", None)
    kw["channels"] = tuple(_channel(i, v) for i, v in enumerate(per_channel))
    try:
        return ScenarioConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}") from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(config: ScenarioConfig) -> str:
    """Serialize with every channel spelled out; ``parse_config`` inverts it exactly."""
    out = io.StringIO()
    out.write("[scenario]\n")
    for key in ("M", "N", "K_bar"):
        out.write(f"{key} = {getattr(config, key)}\n")
    for key in ("T_ms", "T_data", "theta0", "theta1"):
        out.write(f"{key} = {getattr(config, key)!r}\n")
    out.write(f"; T_s = {config.T_s!r}\n")
    out.write(f"schemes = {', '.join(config.schemes)}\n")
    out.write(f"cases = {', '.join(str(c) for c in config.cases)}\n")
    for key in ("p", "baseline_p"):
        v = getattr(config, key)
        out.write(f"{key} = {v if v == 'auto' else repr(float(v))}\n")
    for key in ("baseline_case", "num_slots", "num_replications", "seed"):
        out.write(f"{key} = {getattr(config, key)}\n")
    for i, c in enumerate(config.channels):
        out.write(f"\n[channel.{i + 1}]\n")
        out.write(f"; eta = {c.eta!r}\n")
        for key, attr in (("lambda", "lam"), ("mu", "mu"), ("rate", "rate"), ("epsilon", "epsilon"),
                          ("delta", "delta"), ("gamma", "gamma")):
            out.write(f"{key} = {getattr(c, attr)!r}\n")
    return out.getvalue()
