from __future__ import annotations

import pytest

from txrelay.config import AdversaryConfig, ExperimentConfig, ProtocolParams, RunConfig, TopologyConfig, WorkloadConfig
from txrelay.topology import Link, NodeRecord, Reachability, Role, Topology


def make_topology(layout: list[tuple[str, int]], links: list[tuple[int, int, float]], roles: dict[int, Role] | None = None) -> Topology:
    """Hand-built topology: ``layout`` is one ``(R|U, bucket)`` per node."""
    roles = roles or {}
    nodes = tuple(
        NodeRecord(i, Reachability(cls), bucket, roles.get(i, Role.HONEST)) for i, (cls, bucket) in enumerate(layout)
    )
    return Topology(nodes, tuple(Link(a, b, lat) for a, b, lat in links))


@pytest.fixture
def small_config() -> ExperimentConfig:
    return ExperimentConfig(
        topology=TopologyConfig(num_R=10, num_U=60, u_outbound=4, r_outbound=3, num_buckets=4),
        protocol=ProtocolParams(),
        adversary=AdversaryConfig(enabled=True, num_spy_R=1, connections_per_honest_R=2),
        workload=WorkloadConfig(num_txs=15),
        run=RunConfig(seed=5),
    )


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
