"""Two-timescale resource allocation for an energy-harvesting base station.

Energy purchases are planned once per frame; rate control, channel matching
and power allocation run every slot.
"""

from ._backend import BACKEND
from .clock import Clock, EnvSample, PriceModel, sample_env
from .config import ConfigError, SimConfig, load_config, parse_config, default_config
from .controller import Trajectory, drift_bound_check, run, tradeoff_sweep
from .energy import EnergyDecision, schedule_energy
from .matching import (Matching, PairEvaluation, blocking_pairs, check_c12, delay_to_rate,
                       enforce_energy_causality, match, optimal_power, pair_utility)
from .metrics import MetricsRecord, cdf, par, qoe, shannon_rate, summarize
from .queues import ContractError, DataQueue, EnergyQueue
from .rates import RateProblem, oracle_rates, solve_rates_admm

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Clock", "EnvSample", "PriceModel", "sample_env", "ConfigError", "SimConfig",
    "load_config", "parse_config", "default_config", "Trajectory", "drift_bound_check", "run",
    "tradeoff_sweep", "EnergyDecision", "schedule_energy", "Matching", "PairEvaluation",
    "blocking_pairs", "check_c12", "delay_to_rate", "enforce_energy_causality", "match",
    "optimal_power", "pair_utility", "MetricsRecord", "cdf", "par", "qoe", "shannon_rate",
    "summarize", "ContractError", "DataQueue", "EnergyQueue", "RateProblem", "oracle_rates",
    "solve_rates_admm",
]
