"""Per-node transaction propagation: diffusion and proxied broadcast.

Every node keeps a :class:`NodeProtocolState`. In ``proxy`` mode a node that
creates a transaction hands it to one member of its proxy set instead of
announcing it. A node receiving a proxied transaction keeps proxying it with
probability ``p`` and diffuses it otherwise. R nodes proxy through U peers and
U nodes through R peers. Every node that proxies a transaction arms a timeout
and proxies again unless a strict majority of its outbound peers announced
the transaction back in the meantime.

:class:`Network` owns all node states plus the event queue; the engine pops
events and hands them to the ``on_*`` methods.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .adversary import Observation
from .config import AdversaryConfig, ProtocolParams
from .events import (
    ADDR_ROUND,
    DELIVER,
    EPOCH,
    MSG_ADDR,
    MSG_ANNOUNCE,
    MSG_NAMES,
    MSG_PROXY,
    TIMEOUT,
    EventQueue,
    format_event,
)
from .rng import SeededRng
from .topology import PeerClass, Topology, peers_by_bucket

__all__ = [
    "Network",
    "NodeProtocolState",
    "Phase",
    "select_proxy_set",
]


class Phase(str, enum.Enum):
    PROXYING = "proxying"
    DIFFUSED = "diffused"


@dataclass(slots=True)
class NodeProtocolState:
    seen: set = field(default_factory=set)
    phase_of: dict = field(default_factory=dict)
    proxy_set: list = field(default_factory=list)
    pending_timeouts: dict = field(default_factory=dict)
    announce_log: dict = field(default_factory=dict)
    active: bool = False
    # bookkeeping outside the protocol rules proper
    proxied_to: dict = field(default_factory=dict)
    retries: dict = field(default_factory=dict)
    depth: dict = field(default_factory=dict)
    addr_relayed: set = field(default_factory=set)
    received_from: dict = field(default_factory=dict)
    joined: set = field(default_factory=set)


def select_proxy_set(
    rng: SeededRng,
    buckets: dict[int, list[int]],
    k: int,
    use_buckets: bool = True,
) -> list[int]:
    """Pick up to ``k`` proxies.

    With buckets: choose distinct buckets uniformly, one uniform peer from
    each, and only once every bucket is represented fill the remaining slots
    uniformly from the leftover peers. Without buckets: a uniform ``k``-subset.
    """
    peers = [p for group in buckets.values() for p in group]
    if not use_buckets:
        return rng.sample(sorted(peers), min(k, len(peers)))
    keys = sorted(buckets)
    chosen = [rng.choice(buckets[b]) for b in rng.sample(keys, min(k, len(keys)))]
    if len(chosen) < k:
        taken = set(chosen)
        rest = sorted(p for p in peers if p not in taken)
        chosen += rng.sample(rest, min(k - len(chosen), len(rest)))
    return chosen


@dataclass
class Counters:
    violations: int = 0
    retries: int = 0
    fallbacks: int = 0
    safety_valve: int = 0
    duplicate_proxy: int = 0
    retained: int = 0


class Network:
    """Mutable run state for one simulation."""

    def __init__(
        self,
        topology: Topology,
        params: ProtocolParams,
        adversary: AdversaryConfig,
        rng: SeededRng,
        *,
        t_end: float = 3600.0,
        trace: bool = False,
        diffusion_flood: bool = True,
        advertise_unreachable: bool = True,
    ) -> None:
        self.topology = topology
        self.params = params
        self.adversary = adversary
        self.rng = rng
        self.t_end = t_end
        self.skip_last = 0.0
        self.skip_late = False
        self.queue = EventQueue()
        self.trace: list[str] | None = [] if trace else None
        self.flood = diffusion_flood
        self.advertise_unreachable = advertise_unreachable
        self.proxy_mode = params.mode == "proxy"
        self.retain = adversary.enabled and adversary.behavior == "retain_proxied"

        nodes = topology.nodes
        n = len(nodes)
        self.reach = [rec.reachable for rec in nodes]
        self.adv = [rec.adversarial for rec in nodes]
        self.outbound_count = [len(s) for s in topology.outbound]
        self.outbound = topology.outbound
        # per node: (link index, peer, latency) for every incident link
        self.ports: list[list[tuple[int, int, float]]] = [[] for _ in range(n)]
        self.first_link: list[dict[int, int]] = [{} for _ in range(n)]
        for li, link in enumerate(topology.links):
            a, b, lat = link.initiator, link.acceptor, link.latency_mean
            self.ports[a].append((li, b, lat))
            self.ports[b].append((li, a, lat))
            self.first_link[a].setdefault(b, li)
            self.first_link[b].setdefault(a, li)
        self.latency = [link.latency_mean for link in topology.links]
        self.states = [NodeProtocolState() for _ in range(n)]

        self.created: dict[int, tuple[int, float]] = {}
        self.receipts: dict[int, list[float]] = {}
        self.first_diffusion: dict[int, tuple[float, int, int]] = {}
        self.tx_retries: dict[int, int] = {}
        self.origin_exposed: dict[int, bool | None] = {}
        self.observations: list[Observation] = []
        self.msg_counts = [0, 0, 0]
        self.addr_originated = {"R": 0, "U": 0}
        self.addr_messages = {"R": 0, "U": 0}
        self.counters = Counters()
        self.work = 0

    # ------------------------------------------------------------------ epochs

    def eligible_buckets(self, node: int) -> dict[int, list[int]]:
        cls = PeerClass.UNREACHABLE if self.reach[node] else PeerClass.REACHABLE
        return peers_by_bucket(self.topology, node, cls)

    def on_epoch_tick(self, node: int) -> None:
        st = self.states[node]
        buckets = self.eligible_buckets(node)
        k = self.params.proxy_set_size_k
        if self.reach[node]:
            st.proxy_set = select_proxy_set(self.rng, buckets, k, use_buckets=True)
            st.active = len(buckets) >= self.params.activation_min_buckets_m
        else:
            st.proxy_set = select_proxy_set(self.rng, buckets, k, use_buckets=False)
            st.active = bool(st.proxy_set)

    def start_epochs(self) -> None:
        """Initial proxy sets at t=0, then per-node ticks at a random phase."""
        epoch = self.params.epoch_len
        for node in range(len(self.states)):
            self.on_epoch_tick(node)
            self.queue.push(self.rng.uniform(0.0, epoch), EPOCH, node)

    def handle_epoch(self, now: float, node: int) -> None:
        self.on_epoch_tick(node)
        self.queue.push(now + self.params.epoch_len, EPOCH, node)

    # ------------------------------------------------------------- messaging

    def _push_work(self, time: float, kind: int, *payload) -> None:
        self.work += 1
        self.queue.push(time, kind, *payload)

    def diffuse(self, node: int, tx: int, now: float, exclude=()) -> None:
        """Announce ``tx`` over every link whose far end is not known to have it."""
        st = self.states[node]
        st.phase_of[tx] = Phase.DIFFUSED
        st.pending_timeouts.pop(tx, None)
        if tx not in self.first_diffusion:
            self.first_diffusion[tx] = (now, node, st.depth.get(tx, 0))
        if not self.flood:
            return
        lam = self.params.diffusion_rate_lambda
        expo = self.rng.expovariate
        queue = self.queue
        states = self.states
        adv = self.adv
        skip_ok = self.trace is None
        t_end = self.t_end
        counts = self.msg_counts
        for li, peer, lat in self.ports[node]:
            if peer in exclude:
                continue
            arrival = now + expo(lam) + lat
            if skip_ok and not adv[peer]:
                pst = states[peer]
                if tx in pst.seen and tx not in pst.pending_timeouts:
                    # delivery would be a no-op at the receiver
                    queue.skip_seq()
                    if arrival <= t_end:
                        counts[MSG_ANNOUNCE] += 1
                        if arrival > self.skip_last:
                            self.skip_last = arrival
                    else:
                        self.skip_late = True
                    continue
            self.work += 1
            queue.push(arrival, DELIVER, MSG_ANNOUNCE, tx, node, peer, li, now, 0)

    def proxy(self, node: int, tx: int, now: float, exclude=()) -> None:
        """Send ``tx`` to one random proxy and arm the timeout."""
        st = self.states[node]
        ps = st.proxy_set
        if not ps:
            self.counters.fallbacks += 1
            self.diffuse(node, tx, now, exclude)
            return
        sender = st.received_from.get(tx)
        if sender in ps and len(ps) > 1:
            # never bounce straight back to the peer that handed us the tx
            ps = [q for q in ps if q != sender]
        target = ps[self.rng.randbelow(len(ps))]
        li = self.first_link[node][target]
        st.phase_of[tx] = Phase.PROXYING
        st.announce_log.setdefault(tx, set())
        st.proxied_to.setdefault(tx, set()).add(target)
        deadline = now + self.params.timeout_t
        st.pending_timeouts[tx] = deadline
        self._push_work(now + self.latency[li], DELIVER, MSG_PROXY, tx, node, target, li, now,
                        st.depth.get(tx, 0) + 1)
        self._push_work(deadline, TIMEOUT, node, tx)

    # ---------------------------------------------------------------- events

    def on_create(self, now: float, tx: int, origin: int) -> None:
        st = self.states[origin]
        self.created[tx] = (origin, now)
        receipts = self.receipts[tx] = [float("inf")] * len(self.states)
        receipts[origin] = now
        self.tx_retries[tx] = 0
        st.seen.add(tx)
        st.depth[tx] = 0
        if self.proxy_mode and st.active:
            self.origin_exposed[tx] = any(self.adv[p] for p in st.proxy_set)
            self.proxy(origin, tx, now)
        else:
            self.origin_exposed[tx] = None
            self.diffuse(origin, tx, now)

    def on_deliver(self, now: float, seq: int, kind: int, tx, frm: int, to: int,
                   link: int, sent: float, hops: int) -> None:
        self.msg_counts[kind] += 1
        if kind == MSG_ADDR:
            self._on_addr(now, tx, frm, to, hops)
            return
        if self.adv[to] and not self.adv[frm]:
            self.observations.append(Observation(tx, now, frm, MSG_NAMES[kind], seq, to))
        st = self.states[to]
        if tx in st.seen:
            if kind == MSG_PROXY:
                self.counters.duplicate_proxy += 1
            elif tx in st.pending_timeouts and frm in self.outbound[to]:
                st.announce_log[tx].add(frm)
                if tx not in st.joined:
                    self._join_diffusion(to, tx, now, frm)
            return
        st.seen.add(tx)
        row = self.receipts.get(tx)
        if row is None:
            row = self.receipts[tx] = [float("inf")] * len(self.states)
        row[to] = now
        if kind == MSG_ANNOUNCE:
            self.diffuse(to, tx, now, (frm,))
            return
        self.on_receive_proxying(now, to, tx, frm, hops)

    def _join_diffusion(self, node: int, tx: int, now: float, frm: int) -> None:
        """Relay a tx we are still proxying once an outbound peer announces it.

        The node then acts like any relay that just learned the tx; the
        timeout and majority check stay armed.
        """
        st = self.states[node]
        st.joined.add(tx)
        pending = st.pending_timeouts[tx]
        exclude = {frm, st.received_from.get(tx)} | st.proxied_to.get(tx, set())
        self.diffuse(node, tx, now, exclude)
        st.phase_of[tx] = Phase.PROXYING
        st.pending_timeouts[tx] = pending

    def on_receive_proxying(self, now: float, node: int, tx: int, frm: int, hops: int) -> None:
        st = self.states[node]
        st.depth[tx] = hops
        st.received_from[tx] = frm
        if self.retain and self.adv[node]:
            self.counters.retained += 1
            return
        if self.reach[node] == self.reach[frm]:
            self.counters.violations += 1
            self.diffuse(node, tx, now, (frm,))
        elif self.rng.random() < self.params.p:
            self.proxy(node, tx, now, (frm,))
        else:
            self.diffuse(node, tx, now, (frm,))

    def on_timeout(self, now: float, node: int, tx: int) -> None:
        st = self.states[node]
        if st.pending_timeouts.get(tx) != now:
            return
        if not self.flood and tx in self.first_diffusion:
            del st.pending_timeouts[tx]
            return
        log = st.announce_log[tx]
        exclude = log | st.proxied_to.get(tx, set())
        # peers that handed us the tx or took it from us never announce it back
        silent = st.proxied_to.get(tx, set()) | {st.received_from.get(tx)}
        watched = sum(1 for q in self.outbound[node] if q not in silent)
        if 2 * len(log) > watched:
            del st.pending_timeouts[tx]
            return
        if st.retries.get(tx, 0) >= self.params.max_retries:
            self.counters.safety_valve += 1
            self.diffuse(node, tx, now, exclude)
            return
        st.retries[tx] = st.retries.get(tx, 0) + 1
        self.counters.retries += 1
        self.tx_retries[tx] += 1
        self.proxy(node, tx, now, exclude)

    # ----------------------------------------------------------- addr gossip

    def on_addr_round(self, now: float, node: int, round_no: int) -> None:
        cls = "R" if self.reach[node] else "U"
        if cls == "U" and not self.advertise_unreachable:
            return
        self.addr_originated[cls] += 1
        for li, peer, lat in self.ports[node]:
            self._push_work(now + lat, DELIVER, MSG_ADDR, (node, round_no), node, peer, li, now, 0)

    def _on_addr(self, now: float, addr, frm: int, to: int, hop: int) -> None:
        self.addr_messages["R" if self.reach[addr[0]] else "U"] += 1
        st = self.states[to]
        if hop > 0 or addr in st.addr_relayed:
            return
        st.addr_relayed.add(addr)
        for li, peer, lat in self.ports[to]:
            if peer != frm:
                self._push_work(now + lat, DELIVER, MSG_ADDR, addr, to, peer, li, now, 1)

    # ------------------------------------------------------------------ loop

    def run(self) -> tuple[bool, float]:
        """Dispatch events until no transaction work remains or ``t_end``.

        Returns ``(quiescent, last_event_time)``.
        """
        queue = self.queue
        heap = queue._heap
        trace = self.trace
        t_end = self.t_end
        from heapq import heappop

        last = 0.0
        while self.work > 0:
            if not heap:
                break
            if heap[0][0] > t_end:
                return False, max(last, self.skip_last)
            item = heappop(heap)
            now = item[0]
            queue.now = now
            kind = item[2]
            if trace is not None:
                trace.append(format_event(item))
            if kind == DELIVER:
                self.work -= 1
                self.on_deliver(now, item[1], *item[3:])
            elif kind == TIMEOUT:
                self.work -= 1
                self.on_timeout(now, item[3], item[4])
            elif kind == EPOCH:
                self.handle_epoch(now, item[3])
                continue
            elif kind == ADDR_ROUND:
                self.work -= 1
                self.on_addr_round(now, item[3], item[4])
            else:
                self.work -= 1
                self.on_create(now, item[3], item[4])
            last = now
        # skipped no-op deliveries still count toward the clock and quiescence
        if self.skip_late:
            return False, max(last, self.skip_last)
        return True, max(last, self.skip_last)
