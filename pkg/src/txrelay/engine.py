"""Running one simulation end to end."""

from __future__ import annotations

from dataclasses import dataclass, field

from .adversary import Observation
from .config import AddrConfig, AdversaryConfig, ExperimentConfig, ProtocolParams, WorkloadConfig
from .events import ADDR_ROUND, CREATE, MSG_NAMES
from .protocols import Counters, Network
from .rng import SeededRng
from .topology import Reachability, Topology, build_topology, deploy_adversary

__all__ = [
    "NonQuiescent",
    "RunResult",
    "Transaction",
    "build_world",
    "make_workload",
    "run",
    "simulate",
]


class NonQuiescent(RuntimeWarning):
    """t_end was reached with events still pending; reported, not raised."""


@dataclass(frozen=True)
class Transaction:
    txid: int
    origin: int
    created_at: float


@dataclass
class RunResult:
    topology: Topology
    transactions: list[Transaction]
    receipts: dict[int, list[float]]
    first_diffusion: dict[int, tuple[float, int, int]]
    observations: list[Observation]
    origin_exposed: dict[int, bool | None]
    tx_retries: dict[int, int]
    msg_counts: dict[str, int]
    addr_originated: dict[str, int]
    addr_messages: dict[str, int]
    counters: Counters
    quiescent: bool
    end_time: float
    trace: list[str] | None = None
    proxy_sets: dict[int, list[int]] = field(default_factory=dict)


def make_workload(topology: Topology, cfg: WorkloadConfig, rng: SeededRng) -> list[Transaction]:
    """Poisson arrivals at ``creation_rate`` with uniformly drawn origins."""
    if cfg.origins == "honest_R":
        pool = topology.honest_ids(Reachability.R)
    elif cfg.origins == "honest_U":
        pool = topology.honest_ids(Reachability.U)
    else:
        pool = topology.honest_ids()
    if cfg.num_txs and not pool:
        raise ValueError(f"no nodes available for origins={cfg.origins!r}")
    txs = []
    t = 0.0
    for txid in range(cfg.num_txs):
        t += rng.expovariate(cfg.creation_rate)
        txs.append(Transaction(txid, rng.choice(pool), t))
    return txs


def run(
    topology: Topology,
    params: ProtocolParams,
    adversary: AdversaryConfig,
    workload: list[Transaction],
    seed: int,
    *,
    t_end: float = 3600.0,
    trace: bool = False,
    diffusion_flood: bool = True,
    addr: AddrConfig | None = None,
) -> RunResult:
    """Simulate ``workload`` on ``topology``; identical inputs give identical output."""
    params.validate()
    net = Network(
        topology,
        params,
        adversary,
        SeededRng(seed).derive("protocol"),
        t_end=t_end,
        trace=trace,
        diffusion_flood=diffusion_flood,
        advertise_unreachable=addr.advertise_unreachable if addr else True,
    )
    has_work = bool(workload) or bool(addr and addr.enabled and addr.rounds)
    if params.mode == "proxy" and has_work:
        net.start_epochs()
    proxy_sets = {i: list(st.proxy_set) for i, st in enumerate(net.states)}
    for tx in workload:
        net._push_work(tx.created_at, CREATE, tx.txid, tx.origin)
    if addr is not None and addr.enabled:
        for r in range(addr.rounds):
            for node in range(len(topology.nodes)):
                net._push_work(r * addr.interval, ADDR_ROUND, node, r)
    quiescent, end = net.run()
    return RunResult(
        topology=topology,
        transactions=list(workload),
        receipts=net.receipts,
        first_diffusion=net.first_diffusion,
        observations=net.observations,
        origin_exposed=net.origin_exposed,
        tx_retries=net.tx_retries,
        msg_counts=dict(zip(MSG_NAMES, net.msg_counts)),
        addr_originated=net.addr_originated,
        addr_messages=net.addr_messages,
        counters=net.counters,
        quiescent=quiescent,
        end_time=end,
        trace=net.trace,
        proxy_sets=proxy_sets,
    )


def build_world(cfg: ExperimentConfig, seed: int) -> tuple[Topology, list[Transaction]]:
    """Topology, adversary and workload for a seed; independent of the protocol mode."""
    root = SeededRng(seed)
    topo = build_topology(cfg.topology, root.derive("topology"))
    topo = deploy_adversary(
        topo, cfg.adversary, root.derive("adversary"),
        latency=(cfg.topology.latency_min, cfg.topology.latency_max),
    )
    workload = make_workload(topo, cfg.workload, root.derive("workload"))
    return topo, workload


def simulate(cfg: ExperimentConfig, seed: int | None = None) -> RunResult:
    seed = cfg.run.seed if seed is None else seed
    topo, workload = build_world(cfg, seed)
    return run(
        topo, cfg.protocol, cfg.adversary, workload, seed,
        t_end=cfg.run.t_end,
        trace=cfg.run.trace,
        diffusion_flood=cfg.run.diffusion_flood,
        addr=cfg.addr,
    )
