"""Parameter sweeps, figure presets and CSV output."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytics import NotApplicableError, improved_policy_throughput_bound, throughput
from .channel import ChannelParams
from .config import ConfigError, ScenarioConfig, dump_config
from .engine import PROPOSED, access_probability, run_simulation

log = logging.getLogger(__name__)

COLUMNS = ("param_name", "param_value", "scheme", "case", "p", "sim_throughput_bps",
           "sim_throughput_ci", "ana_throughput_bps", "pu_collision", "pu_collision_ci",
           "pu_throughput_bps", "upper_bound_bps", "seed")

SWEEP_PARAMS = ("epsilon", "delta", "eta", "gamma", "p")
CHANNEL_KEYS = ("epsilon", "delta", "eta", "gamma", "rate", "correlation")
SCENARIO_KEYS = ("M", "N", "K_bar", "T_ms", "T_data", "theta0", "theta1", "p", "baseline_p",
                 "baseline_case")

# metric plotted by each figure, and its axis label
FIGURE_METRIC = {
    4: ("sim_throughput_bps", "throughput (bit/s)"),
    5: ("sim_throughput_bps", "throughput (bit/s)"),
    6: ("sim_throughput_bps", "throughput (bit/s)"),
    7: ("pu_collision", "collision probability with primary users"),
    8: ("pu_throughput_bps", "primary user throughput (bit/s)"),
}
AXIS_LABEL = {"epsilon": "false alarm probability", "delta": "miss detection probability",
              "eta": "channel utilization", "gamma": "collision budget",
              "p": "access probability"}


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter, its values, and overrides applied before sweeping."""

    param: str
    values: tuple = ()
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep.param: {self.param!r} is not one of {', '.join(SWEEP_PARAMS)}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        hi = 0.5 if self.param in ("epsilon", "delta") else 1.0
        for v in self.values:
            if not 0.0 <= v <= hi:
                raise ConfigError(f"sweep.values: {self.param}={v} outside [0, {hi}]")
        for key in self.overrides:
            if key not in CHANNEL_KEYS and key not in SCENARIO_KEYS:
                raise ConfigError(f"sweep.overrides: unknown field {key!r}")


FIGURES = {
    4: SweepSpec("epsilon", (0.1, 0.2, 0.3, 0.4, 0.5), {"delta": 0.3}),
    5: SweepSpec("delta", (0.1, 0.2, 0.3, 0.4, 0.5), {"epsilon": 0.3}),
    6: SweepSpec("eta", (0.3, 0.4, 0.5, 0.6, 0.7)),
    7: SweepSpec("eta", (0.3, 0.4, 0.5, 0.6, 0.7)),
    8: SweepSpec("eta", (0.3, 0.4, 0.5, 0.6, 0.7)),
}


def apply_overrides(config: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    scen = {k: v for k, v in overrides.items() if k in SCENARIO_KEYS}
    chan = {k: v for k, v in overrides.items() if k in CHANNEL_KEYS}
    if scen:
        for k in ("M", "N", "K_bar", "baseline_case"):
            if k in scen:
                scen[k] = int(scen[k])
        if "M" in scen and scen["M"] != config.M:
            # grow or shrink by repeating the first channel
            scen["channels"] = (config.channels[0],) * scen["M"]
        config = config.replace(**scen)
    if "correlation" in chan:
        corr = chan.pop("correlation")
        eta = chan.pop("eta", None)
        config = _set_correlation(config, corr, eta)
    if chan:
        config = config.with_channels(**chan)
    return config


def _set_correlation(config, corr, eta=None):
    chans = []
    for c in config.channels:
        try:
            chans.append(ChannelParams.from_utilization(
                c.eta if eta is None else eta, correlation=corr, rate=c.rate, gamma=c.gamma,
                epsilon=c.epsilon, delta=c.delta))
        except ValueError as exc:
            raise ConfigError(f"channels.correlation: {exc}") from None
    return config.replace(channels=tuple(chans))


def point_config(config: ScenarioConfig, param: str, value: float) -> ScenarioConfig:
    """``config`` with the swept parameter set to ``value``."""
    if param == "p":
        return config.replace(p=value, baseline_p=value)
    return config.with_channels(**{param: value})


def combos(config: ScenarioConfig) -> list[tuple[str, int]]:
    """Scheme/case pairs to run: proposed schemes in every case, baselines in one."""
    out = []
    for s in config.schemes:
        cases = config.cases if s in PROPOSED else (config.baseline_case,)
        out.extend((s, c) for c in cases)
    return sorted(set(out))


def analytical_throughput(config: ScenarioConfig, scheme: str, case: int, p: float) -> float:
    """Exact value for memoryless, conditioned-law bound for improved, nan otherwise."""
    if scheme == "memoryless":
        return throughput(config, case, p).omega
    if scheme == "improved":
        try:
            return improved_policy_throughput_bound(config, case, p).omega
        except NotApplicableError:
            return math.nan
    return math.nan


def _row(param, value, config, scheme, case, metrics=None, p=None):
    p = metrics.p if metrics is not None else p
    row = {"param_name": param, "param_value": value, "scheme": scheme, "case": case, "p": p,
           "ana_throughput_bps": analytical_throughput(config, scheme, case, p),
           "upper_bound_bps": config.upper_bound, "seed": config.seed}
    if metrics is not None:
        row["sim_throughput_bps"], row["sim_throughput_ci"] = metrics.throughput_mean_ci
        row["pu_collision"], row["pu_collision_ci"] = metrics.collision_mean_ci
        row["pu_throughput_bps"] = metrics.primary_throughput_mean_ci[0]
    else:
        for key in ("sim_throughput_bps", "sim_throughput_ci", "pu_collision",
                    "pu_collision_ci", "pu_throughput_bps"):
            row[key] = math.nan
    row["gamma"] = float(np.mean([c.gamma for c in config.channels]))
    return row


def pin_baseline_p(config: ScenarioConfig) -> ScenarioConfig:
    """Resolve ``baseline_p = auto`` once, at this configuration.

    Baselines ignore sensing errors, so their p must not follow the swept
    error rates or utilization; it is fixed at the sweep's base scenario.
    """
    if config.baseline_p != "auto":
        return config
    return config.replace(baseline_p=access_probability(config, "memoryless",
                                                        config.baseline_case))


def _points(config: ScenarioConfig, sweep: SweepSpec | None):
    base = config if sweep is None else apply_overrides(config, sweep.overrides)
    if sweep is None or not sweep.values:
        return "point", [(math.nan, base)]
    if sweep.param == "p":
        return "p", [(v, base.replace(p=v, baseline_p=v)) for v in sweep.values]
    base = pin_baseline_p(base)
    return sweep.param, [(v, point_config(base, sweep.param, v)) for v in sweep.values]


def run_experiment(config: ScenarioConfig, sweep: SweepSpec | None = None,
                   simulate: bool = True) -> list[dict]:
    """One row per sweep value, scheme and case, sorted by (value, scheme, case).

    ``simulate=False`` fills only the analytical columns.
    """
    name, points = _points(config, sweep)
    rows = []
    for value, cfg in points:
        for scheme, case in combos(cfg):
            p = access_probability(cfg, scheme, case)
            if simulate:
                log.info("%s=%s %s case %d p=%.4g", name, value, scheme, case, p)
                metrics = run_simulation(cfg, scheme, case, p=p)
                rows.append(_row(name, value, cfg, scheme, case, metrics))
            else:
                rows.append(_row(name, value, cfg, scheme, case, p=p))
    rows.sort(key=lambda r: (_sort_value(r["param_value"]), r["scheme"], r["case"]))
    return rows


def _sort_value(v):
    return -math.inf if math.isnan(v) else v


def fmt(v) -> str:
    """Positional decimal with 10 significant digits; blank for nan."""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or math.isnan(v):
        return ""
    v = float(v)
    if v == 0.0:
        return "0.000000000"
    # exponent after rounding to 10 digits, so 9.99999999999 -> 10.00000000
    exp = int(f"{v:.9e}".split("e")[1])
    return f"{v:.{max(9 - exp, 0)}f}"


def write_csv(path: Path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([fmt(x) for x in r])
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from None


def plot_table(rows: list[dict], metric: str, with_analysis: bool = False,
               extra: dict | None = None):
    """Pivot rows into (header, table): x, one column per scheme-case, then extras."""
    keys = sorted({(r["scheme"], r["case"]) for r in rows})
    xs = sorted({r["param_value"] for r in rows}, key=_sort_value)
    look = {(r["param_value"], r["scheme"], r["case"]): r for r in rows}
    header = [rows[0]["param_name"] if rows else "x"]
    header += [f"{s}_case{c}" for s, c in keys]
    ana_keys = [k for k in keys if k[0] in PROPOSED] if with_analysis else []
    header += [f"{s}_case{c}_analysis" for s, c in ana_keys]
    extra = extra or {}
    header += list(extra)
    table = []
    for x in xs:
        line = [x] + [look[(x, *k)][metric] if (x, *k) in look else math.nan for k in keys]
        line += [look[(x, *k)]["ana_throughput_bps"] if (x, *k) in look else math.nan
                 for k in ana_keys]
        first = next(r for r in rows if r["param_value"] == x or
                     (math.isnan(x) and math.isnan(r["param_value"])))
        line += [first[src] for src in extra.values()]
        table.append(line)
    return header, table


def emit_outputs(rows: list[dict], out_dir, config: ScenarioConfig, figure: int | None = None,
                 plots: bool = True) -> list[Path]:
    """Write results.csv, scenario.ini, the plot-data CSV and (optionally) a PNG."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror}") from None
    written = []
    path = out / "results.csv"
    write_csv(path, COLUMNS, [[r[c] for c in COLUMNS] for r in rows])
    written.append(path)
    path = out / "scenario.ini"
    try:
        path.write_text(dump_config(config))
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from None
    written.append(path)
    if not rows:
        return written

    metric, ylabel = FIGURE_METRIC.get(figure, FIGURE_METRIC[4])
    if all(math.isnan(r["sim_throughput_bps"]) for r in rows):
        metric, ylabel = "ana_throughput_bps", "analytical throughput (bit/s)"
    extra = {}
    if figure == 6 or figure is None:
        extra["upper_bound"] = "upper_bound_bps"
    if figure == 7:
        extra["gamma"] = "gamma"
    header, table = plot_table(rows, metric, with_analysis=metric == "sim_throughput_bps",
                               extra=extra)
    stem = f"fig{figure}" if figure is not None else "sweep"
    path = out / f"{stem}_data.csv"
    write_csv(path, header, table)
    written.append(path)
    if plots:
        from .plotting import plot_point, plot_sweep
        path = out / f"{stem}.png"
        if rows[0]["param_name"] == "point":
            plot_point(rows, metric, ylabel, path)
        else:
            plot_sweep(header, table, AXIS_LABEL.get(header[0], header[0]), ylabel, path)
        written.append(path)
    return written


def run_figure(config: ScenarioConfig, figure: int) -> list[dict]:
    if figure not in FIGURES:
        raise ConfigError(f"figure: expected one of {sorted(FIGURES)}, got {figure}")
    return run_experiment(config, FIGURES[figure])
