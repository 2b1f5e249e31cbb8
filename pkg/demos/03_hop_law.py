"""
How many proxies does a transaction pass through?
==================================================

Each proxy forwards with probability p and starts diffusion otherwise, so the
path length should be geometric with mean 1/(1-p).
"""

import statistics

from txrelay import ExperimentConfig, simulate
from txrelay.config import ProtocolParams, RunConfig, TopologyConfig, WorkloadConfig

# only the proxy phase matters here, so skip the announce flood
for p in (0.0, 0.25, 0.5, 0.8):
    cfg = ExperimentConfig(
        topology=TopologyConfig(num_R=300, num_U=3000),
        protocol=ProtocolParams(p=p),
        workload=WorkloadConfig(num_txs=3000, creation_rate=10.0),
        run=RunConfig(seed=3, diffusion_flood=False),
    )
    result = simulate(cfg)
    hops = [h for _, _, h in result.first_diffusion.values()]
    print(f"p={p:<4}  mean hops {statistics.fmean(hops):.3f}  expected {1 / (1 - p):.3f}  longest {max(hops)}")
