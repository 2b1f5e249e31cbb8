"""Overlay topology of reachable (R), unreachable (U) and adversarial nodes.

Links are directed by who opened the connection: the acceptor of every link
is reachable. Messages flow both ways over a link once it exists.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .config import AdversaryConfig, TopologyConfig
from .rng import SeededRng

__all__ = [
    "BadConfig",
    "CapacityExceeded",
    "InfeasibleDegrees",
    "Link",
    "NodeRecord",
    "PeerClass",
    "Reachability",
    "Role",
    "Topology",
    "TopologyError",
    "UnknownNode",
    "build_topology",
    "deploy_adversary",
    "dump_topology",
    "load_topology",
    "parse_topology",
    "peers_by_bucket",
]


class TopologyError(Exception):
    pass


class BadConfig(TopologyError):
    pass


class InfeasibleDegrees(TopologyError):
    pass


class CapacityExceeded(TopologyError):
    pass


class UnknownNode(TopologyError, KeyError):
    pass


class Reachability(str, enum.Enum):
    R = "R"
    U = "U"


class Role(str, enum.Enum):
    HONEST = "honest"
    ADVERSARY_REACHABLE = "adversary_reachable"
    ADVERSARY_UNREACHABLE = "adversary_unreachable"


class PeerClass(str, enum.Enum):
    REACHABLE = "reachable"
    UNREACHABLE = "unreachable"


@dataclass(frozen=True)
class NodeRecord:
    id: int
    reachability: Reachability
    bucket: int
    role: Role = Role.HONEST

    @property
    def reachable(self) -> bool:
        return self.reachability is Reachability.R

    @property
    def adversarial(self) -> bool:
        return self.role is not Role.HONEST


@dataclass(frozen=True)
class Link:
    initiator: int
    acceptor: int
    latency_mean: float


@dataclass(frozen=True)
class Topology:
    nodes: tuple[NodeRecord, ...]
    links: tuple[Link, ...]
    max_connections: int = field(default=125, compare=False)

    @cached_property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        """Link indices touching each node, in link order."""
        inc: list[list[int]] = [[] for _ in self.nodes]
        for i, link in enumerate(self.links):
            inc[link.initiator].append(i)
            inc[link.acceptor].append(i)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Distinct peers of each node, sorted."""
        out: list[set[int]] = [set() for _ in self.nodes]
        for link in self.links:
            out[link.initiator].add(link.acceptor)
            out[link.acceptor].add(link.initiator)
        return tuple(tuple(sorted(s)) for s in out)

    @cached_property
    def outbound(self) -> tuple[frozenset[int], ...]:
        out: list[set[int]] = [set() for _ in self.nodes]
        for link in self.links:
            out[link.initiator].add(link.acceptor)
        return tuple(frozenset(s) for s in out)

    def node(self, node_id: int) -> NodeRecord:
        if not 0 <= node_id < len(self.nodes):
            raise UnknownNode(node_id)
        return self.nodes[node_id]

    def honest_ids(self, reachability: Reachability | None = None) -> list[int]:
        return [
            n.id
            for n in self.nodes
            if not n.adversarial and (reachability is None or n.reachability is reachability)
        ]

    def connection_count(self, node_id: int) -> int:
        return len(self.incident[node_id])


def _new_latency(rng: SeededRng, cfg_min: float, cfg_max: float) -> float:
    return rng.uniform(cfg_min, cfg_max)


def build_topology(config: TopologyConfig, rng: SeededRng) -> Topology:
    """Generate an honest overlay.

    R nodes open ``r_outbound`` links to other R nodes, then every U node opens
    ``u_outbound`` links to R nodes. Each initiator picks uniformly without
    replacement among R nodes that still have a free inbound slot.
    """
    if config.num_R <= 0 or config.num_U < 0:
        raise BadConfig("need num_R > 0 and num_U >= 0")
    if config.r_outbound < 0 or config.u_outbound < 0 or config.num_buckets <= 0:
        raise BadConfig("degrees must be >= 0 and num_buckets > 0")
    n_r, n_u = config.num_R, config.num_U
    inbound_cap = config.max_connections - config.r_outbound
    if config.r_outbound > n_r - 1:
        raise InfeasibleDegrees(f"r_outbound={config.r_outbound} needs at least {config.r_outbound + 1} R nodes")
    if n_u and config.u_outbound > n_r:
        raise InfeasibleDegrees(f"u_outbound={config.u_outbound} exceeds the {n_r} R nodes")
    needed = n_r * config.r_outbound + n_u * config.u_outbound
    if inbound_cap < 0 or needed > n_r * inbound_cap:
        raise InfeasibleDegrees(
            f"{needed} outbound links cannot fit into {n_r} R nodes with "
            f"{max(inbound_cap, 0)} inbound slots each"
        )

    nodes = [
        NodeRecord(i, Reachability.R if i < n_r else Reachability.U, i % config.num_buckets)
        for i in range(n_r + n_u)
    ]
    free = [inbound_cap] * n_r
    links: list[Link] = []

    def connect(initiator: int, count: int) -> None:
        candidates = [r for r in range(n_r) if free[r] > 0 and r != initiator]
        if len(candidates) < count:
            raise InfeasibleDegrees(
                f"node {initiator} needs {count} acceptors, only {len(candidates)} have free slots"
            )
        for r in sorted(rng.sample(candidates, count)):
            free[r] -= 1
            links.append(Link(initiator, r, _new_latency(rng, config.latency_min, config.latency_max)))

    for i in range(n_r):
        connect(i, config.r_outbound)
    for i in range(n_r, n_r + n_u):
        connect(i, config.u_outbound)
    return Topology(tuple(nodes), tuple(links), config.max_connections)


def deploy_adversary(
    topology: Topology,
    adv: AdversaryConfig,
    rng: SeededRng,
    latency: tuple[float, float] = (0.05, 0.3),
) -> Topology:
    """Add adversarial spy R nodes and adversarial U nodes.

    Spies open ``connections_per_honest_R`` parallel links to every honest R
    node. Each outbound link of an honest U node is re-pointed to a random spy
    with the probability a uniform pick over honest R plus spies would land on
    one. Adversarial U nodes open as many outbound links as an honest U node.
    """
    if not adv.enabled:
        return topology
    if adv.connections_per_honest_R < 1:
        raise BadConfig("connections_per_honest_R must be >= 1")
    nodes = list(topology.nodes)
    links = list(topology.links)
    honest_r = topology.honest_ids(Reachability.R)
    honest_u = topology.honest_ids(Reachability.U)
    if adv.target_node is not None:
        victim = topology.node(adv.target_node)
        if not victim.reachable or victim.adversarial:
            raise BadConfig("adversary.target_node must be an honest R node")

    start = len(nodes)
    spies = list(range(start, start + adv.num_spy_R))
    adv_u = list(range(start + adv.num_spy_R, start + adv.num_spy_R + adv.num_adv_U))
    for j, nid in enumerate(spies + adv_u):
        role = Role.ADVERSARY_REACHABLE if nid in spies else Role.ADVERSARY_UNREACHABLE
        reach = Reachability.R if nid in spies else Reachability.U
        nodes.append(NodeRecord(nid, reach, j % adv.num_buckets, role))

    lo, hi = latency
    for s in spies:
        for r in honest_r:
            for _ in range(adv.connections_per_honest_R):
                links.append(Link(s, r, _new_latency(rng, lo, hi)))

    if spies:
        share = len(spies) / (len(honest_r) + len(spies))
        honest_u_ids = frozenset(honest_u)
        acceptors: dict[int, set[int]] = defaultdict(set)
        for link in links:
            if link.initiator in honest_u_ids:
                acceptors[link.initiator].add(link.acceptor)
        for i, link in enumerate(links):
            if link.initiator not in honest_u_ids or rng.random() >= share:
                continue
            spy = rng.choice(spies)
            if spy in acceptors[link.initiator]:
                continue
            acceptors[link.initiator].discard(link.acceptor)
            acceptors[link.initiator].add(spy)
            links[i] = Link(link.initiator, spy, link.latency_mean)

    u_out = _u_out_degree(topology)
    for a in adv_u:
        count = len(honest_r) if u_out > len(honest_r) else u_out
        chosen: list[int] = []
        if adv.target_node is not None and count:
            chosen.append(adv.target_node)
        pool = [r for r in honest_r if r not in chosen]
        chosen += rng.sample(pool, count - len(chosen))
        for r in sorted(chosen):
            links.append(Link(a, r, _new_latency(rng, lo, hi)))

    out = Topology(tuple(nodes), tuple(links), topology.max_connections)
    for r in honest_r:
        if out.connection_count(r) > topology.max_connections:
            raise CapacityExceeded(
                f"honest R node {r} would hold {out.connection_count(r)} connections "
                f"(max {topology.max_connections})"
            )
    return out


def _u_out_degree(topology: Topology) -> int:
    for n in topology.nodes:
        if not n.reachable and not n.adversarial:
            return len(topology.outbound[n.id])
    return 8


def peers_by_bucket(topology: Topology, node: int, peer_class: PeerClass) -> dict[int, list[int]]:
    """Group a node's distinct peers of one reachability class by bucket."""
    topology.node(node)
    want = Reachability.R if PeerClass(peer_class) is PeerClass.REACHABLE else Reachability.U
    groups: dict[int, list[int]] = defaultdict(list)
    for peer in topology.neighbors[node]:
        rec = topology.nodes[peer]
        if rec.reachability is want:
            groups[rec.bucket].append(peer)
    return dict(sorted(groups.items()))


def dump_topology(topology: Topology) -> str:
    lines = [
        f"node {n.id} {n.reachability.value} {n.bucket} {n.role.value}" for n in topology.nodes
    ]
    lines += [f"link {l.initiator} {l.acceptor} {l.latency_mean!r}" for l in topology.links]
    return "\n".join(lines) + "\n"


def parse_topology(text: str, max_connections: int = 125) -> Topology:
    nodes: list[NodeRecord] = []
    links: list[Link] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "node" and len(parts) == 5:
                rec = NodeRecord(int(parts[1]), Reachability(parts[2]), int(parts[3]), Role(parts[4]))
                if rec.id != len(nodes):
                    raise ValueError("node ids must be dense and in order")
                nodes.append(rec)
            elif parts[0] == "link" and len(parts) == 4:
                links.append(Link(int(parts[1]), int(parts[2]), float(parts[3])))
            else:
                raise ValueError(f"unrecognised record {line!r}")
        except ValueError as exc:
            raise TopologyError(f"line {lineno}: {exc}") from None
    for l in links:
        if not (0 <= l.initiator < len(nodes) and 0 <= l.acceptor < len(nodes)):
            raise TopologyError(f"link {l} references an unknown node")
        if not nodes[l.acceptor].reachable:
            raise TopologyError(f"link {l} has an unreachable acceptor")
    return Topology(tuple(nodes), tuple(links), max_connections)


def load_topology(path: str | Path, max_connections: int = 125) -> Topology:
    return parse_topology(Path(path).read_text(), max_connections)
