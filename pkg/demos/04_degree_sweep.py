"""
More outbound links for unreachable nodes
=========================================

A sweep over u_outbound with a few replicas per cell; outputs land in a temp dir.
"""

import csv
import tempfile
from pathlib import Path

from txrelay import ExperimentConfig
from txrelay.config import RunConfig, TopologyConfig, WorkloadConfig
from txrelay.runner import run_sweep

cfg = ExperimentConfig(
    topology=TopologyConfig(num_R=40, num_U=400, max_connections=300),
    workload=WorkloadConfig(num_txs=30),
    run=RunConfig(seed=7, replicas=3),
    sweep=(("topology.u_outbound", (4, 8, 16, 24)),),
)

out = Path(tempfile.mkdtemp(prefix="txrelay-sweep-"))
run_sweep(cfg, out)
print(f"reports in {out}")
for row in csv.DictReader((out / "cells.csv").open()):
    print(f"u_outbound={row['topology.u_outbound']:>2}  median t90 {float(row['median_t90']):.3f}s")
