"""
Address gossip with and without unreachable self-announcements
================================================================

U nodes cannot accept connections, so advertising their addresses is wasted traffic.
"""

from txrelay import ExperimentConfig, simulate
from txrelay.config import AddrConfig, TopologyConfig, WorkloadConfig
from txrelay.metrics import addr_traffic

for advertise in (True, False):
    cfg = ExperimentConfig(
        topology=TopologyConfig(num_R=20, num_U=200),
        workload=WorkloadConfig(num_txs=0),
        addr=AddrConfig(enabled=True, advertise_unreachable=advertise, rounds=2),
    )
    t = addr_traffic(simulate(cfg))
    print(f"advertise_unreachable={advertise!s:<5}  originated R={t['originated_R']} U={t['originated_U']}  messages {t['messages']}")

# with U:R = 10:1, dropping U self-announcements removes 10/11 of the originated volume
print(f"expected drop {200 / 220:.1%}")
