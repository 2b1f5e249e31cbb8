"""
First-spy accuracy: plain diffusion against proxying
=====================================================

One eavesdropper keeps two links to every R node and accuses whoever it hears
a transaction from first. Each seed uses the same topology and workload for both modes.
"""

from txrelay import ExperimentConfig, simulate
from txrelay.config import AdversaryConfig, TopologyConfig, WorkloadConfig
from txrelay.metrics import run_metrics

base = ExperimentConfig(
    topology=TopologyConfig(num_R=20, num_U=200),
    adversary=AdversaryConfig(enabled=True, num_spy_R=1, connections_per_honest_R=2),
    workload=WorkloadConfig(num_txs=50),
)

print("seed  diffusion  proxy")
for seed in range(5):
    acc = {}
    for mode in ("diffusion", "proxy"):
        agg = run_metrics(simulate(base.with_value("protocol.mode", mode), seed))["aggregates"]
        acc[mode] = agg["first_spy_accuracy"]
    print(f"{seed:4d}  {acc['diffusion']:9.2f}  {acc['proxy']:5.2f}")

# the price: a few extra proxy hops before the flood starts
agg = run_metrics(simulate(base, 0))["aggregates"]
print(f"proxy mode: mean hops {agg['mean_hops']:.2f}, median t90 {agg['median_t90']:.2f}s")
