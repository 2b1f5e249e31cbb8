"""
Building an overlay with reachable and unreachable nodes
========================================================

Reachable (R) nodes accept inbound links; unreachable (U) nodes only dial out.
"""

from collections import Counter

from txrelay import SeededRng, TopologyConfig, build_topology
from txrelay.topology import Reachability

# a small network: 20 R nodes, 200 U nodes, 4 address buckets
cfg = TopologyConfig(num_R=20, num_U=200, u_outbound=4, r_outbound=4, num_buckets=4)
topo = build_topology(cfg, SeededRng(1).derive("topology"))
print(f"{len(topo.nodes)} nodes, {len(topo.links)} links")

# every link is accepted by an R node
print("acceptor classes:", Counter(topo.nodes[l.acceptor].reachability.value for l in topo.links))

# R nodes carry most of the connections
deg = {n.id: len(topo.neighbors[n.id]) for n in topo.nodes}
r_deg = [deg[i] for i in topo.honest_ids(Reachability.R)]
u_deg = [deg[i] for i in topo.honest_ids(Reachability.U)]
print(f"mean degree R={sum(r_deg) / len(r_deg):.1f}  U={sum(u_deg) / len(u_deg):.1f}")

# buckets are spread evenly
print("bucket sizes:", sorted(Counter(n.bucket for n in topo.nodes).items()))
