"""Multichannel cognitive-radio MAC: noisy cooperative sensing, p-persistent
access under primary-collision budgets, analysis and slot-level simulation."""
from .access import AccessConfig, ContentionOutcome, Outcome, contend_case1, contend_case2
from .analytics import (improved_policy_throughput_bound, interference_probability,
                        stop_time_distribution, throughput, tune_access_probability)
from .channel import ChannelParams, ChannelStateVector, initial_states, step_channels
from .config import ConfigError, ScenarioConfig, load_config, parse_config, reference_scenario
from .engine import AggregateMetrics, run_simulation, run_slot
from .estimator import BeliefState, Verdict, enumerate_decision_sets, posterior_idle
from .experiment import FIGURES, SweepSpec, emit_outputs, run_experiment
from .policies import SCHEMES

__version__ = "0.1.0"
