"""Discrete-event simulator for Bitcoin-style transaction relay with
reachable/unreachable nodes, proxied broadcast and a first-spy adversary."""

from .adversary import FirstSpyReport, Observation, first_spy_estimate
from .config import (
    AddrConfig,
    AdversaryConfig,
    ExperimentConfig,
    ProtocolParams,
    RunConfig,
    TopologyConfig,
    WorkloadConfig,
    load_config,
    parse_config,
)
from .engine import RunResult, Transaction, build_world, run, simulate
from .metrics import coverage_times, run_metrics, score
from .rng import SeededRng, sample_exponential
from .topology import Topology, build_topology, deploy_adversary, peers_by_bucket

__version__ = "0.1.0"

__all__ = [
    "AddrConfig",
    "AdversaryConfig",
    "ExperimentConfig",
    "FirstSpyReport",
    "Observation",
    "ProtocolParams",
    "RunConfig",
    "RunResult",
    "SeededRng",
    "Topology",
    "TopologyConfig",
    "Transaction",
    "WorkloadConfig",
    "build_topology",
    "build_world",
    "coverage_times",
    "deploy_adversary",
    "first_spy_estimate",
    "load_config",
    "parse_config",
    "peers_by_bucket",
    "run",
    "run_metrics",
    "sample_exponential",
    "score",
    "simulate",
]
