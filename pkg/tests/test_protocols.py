import heapq
import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from txrelay.config import AdversaryConfig, ExperimentConfig, ProtocolParams, RunConfig, TopologyConfig, WorkloadConfig
from txrelay.engine import Transaction, run, simulate
from txrelay.events import DELIVER, MSG_ANNOUNCE, MSG_PROXY, TIMEOUT
from txrelay.protocols import Network, Phase, select_proxy_set
from txrelay.rng import SeededRng
from txrelay.topology import Role

from conftest import make_topology

NO_ADV = AdversaryConfig()


def network(topo, seed=0, adversary=NO_ADV, **params):
    return Network(topo, ProtocolParams(**params), adversary, SeededRng(seed), trace=True)


def queued(net, kind=None):
    items = sorted(net.queue._heap)
    return [it for it in items if kind is None or it[2] == kind]


def r_hub(u_buckets, r_out_peers=0):
    """R node 0 with one U peer per entry of ``u_buckets`` and ``r_out_peers`` R peers it dialed."""
    layout = [("R", 0)] + [("U", b) for b in u_buckets] + [("R", 0)] * r_out_peers
    n_u = len(u_buckets)
    links = [(1 + i, 0, 0.1) for i in range(n_u)]
    links += [(0, 1 + n_u + j, 0.1) for j in range(r_out_peers)]
    return make_topology(layout, links)


# ----------------------------------------------------------------- epochs


def test_epoch_tick_spans_distinct_buckets_and_activates():
    net = network(r_hub([0, 0, 1, 1, 2, 2, 3, 3]), proxy_set_size_k=4, activation_min_buckets_m=2)
    net.on_epoch_tick(0)
    st_ = net.states[0]
    assert len(st_.proxy_set) == 4
    assert len({net.topology.nodes[p].bucket for p in st_.proxy_set}) == 4
    assert st_.active


def test_single_bucket_keeps_r_node_inactive_and_diffusing():
    net = network(r_hub([5, 5, 5, 5]), activation_min_buckets_m=2)
    net.on_epoch_tick(0)
    assert not net.states[0].active
    net.on_create(1.0, 0, 0)
    assert {it[3] for it in queued(net, DELIVER)} == {MSG_ANNOUNCE}
    assert len(queued(net, DELIVER)) == 4


def test_fill_after_buckets_exhaust():
    rng = SeededRng(1)
    for _ in range(100):
        chosen = select_proxy_set(rng, {0: [1, 2, 3], 1: [4]}, 3)
        assert len(set(chosen)) == 3 and 4 in chosen


def test_u_node_picks_r_peers_without_buckets():
    topo = make_topology([("U", 0)] + [("R", 0)] * 6, [(0, i, 0.1) for i in range(1, 7)])
    net = network(topo, proxy_set_size_k=4)
    net.on_epoch_tick(0)
    assert len(set(net.states[0].proxy_set)) == 4
    assert net.states[0].active


def test_bucket_selection_frequencies_uniform():
    buckets = {b: [10 * b + i for i in range(3)] for b in range(8)}
    rng = SeededRng(77)
    per_bucket, per_peer = Counter(), Counter()
    for _ in range(10_000):
        chosen = select_proxy_set(rng, buckets, 4)
        assert len({p // 10 for p in chosen}) == 4
        per_bucket.update(p // 10 for p in chosen)
        per_peer.update(chosen)
    assert chisquare([per_bucket[b] for b in range(8)]).pvalue > 0.01
    assert chisquare([per_peer[p] for p in sorted(per_peer)]).pvalue > 0.01


# ------------------------------------------------------------------ proxy


def test_proxy_to_singleton_set():
    net = network(r_hub([0, 1]), proxy_set_size_k=1, timeout_t=30.0)
    net.states[0].proxy_set = [2]
    net.states[0].seen.add(9)
    net.proxy(0, 9, 4.0)
    (msg,) = queued(net, DELIVER)
    assert msg[3] == MSG_PROXY and msg[5] == 0 and msg[6] == 2
    (timeout,) = queued(net, TIMEOUT)
    assert timeout[0] == pytest.approx(34.0) and timeout[3:] == (0, 9)
    assert net.states[0].announce_log[9] == set()
    assert net.states[0].phase_of[9] is Phase.PROXYING


def test_proxy_choice_uniform_over_set():
    net = network(r_hub([0, 1, 2, 3]))
    net.states[0].proxy_set = [1, 2, 3, 4]
    for tx in range(10_000):
        net.proxy(0, tx, 0.0)
    picks = Counter(it[6] for it in queued(net, DELIVER))
    for peer in (1, 2, 3, 4):
        assert picks[peer] / 10_000 == pytest.approx(0.25, abs=0.02)


def test_empty_proxy_set_falls_back_to_diffusion():
    net = network(r_hub([0, 1]))
    net.states[0].seen.add(1)
    net.proxy(0, 1, 0.0)
    assert net.counters.fallbacks == 1
    assert {it[3] for it in queued(net, DELIVER)} == {MSG_ANNOUNCE}


# ---------------------------------------------------------------- timeout


def _pending_origin(announced):
    """Active R origin with 8 outbound R peers of which ``announced`` echoed the tx."""
    topo = r_hub([0, 1], r_out_peers=8)
    net = network(topo, timeout_t=30.0)
    net.on_epoch_tick(0)
    net.on_create(0.0, 0, 0)
    outbound = sorted(net.outbound[0])
    assert len(outbound) == 8
    for peer in outbound[:announced]:
        net.on_deliver(1.0, 0, MSG_ANNOUNCE, 0, peer, 0, 0, 0.5, 0)
    return net


def test_strict_majority_stops_tracking():
    net = _pending_origin(5)
    net.on_timeout(30.0, 0, 0)
    assert 0 not in net.states[0].pending_timeouts
    assert net.counters.retries == 0


def test_half_is_not_a_majority():
    net = _pending_origin(4)
    before = len(queued(net, DELIVER))
    net.on_timeout(30.0, 0, 0)
    assert net.counters.retries == 1
    assert net.states[0].pending_timeouts[0] == pytest.approx(60.0)
    assert len(queued(net, DELIVER)) == before + 1


def test_retry_cap_forces_local_diffusion():
    net = _pending_origin(0)
    t = 30.0
    for _ in range(net.params.max_retries):
        net.on_timeout(t, 0, 0)
        t += 30.0
    assert net.counters.retries == net.params.max_retries
    net.on_timeout(t, 0, 0)
    assert net.counters.safety_valve == 1
    assert net.states[0].phase_of[0] is Phase.DIFFUSED


def small_proxy_config(**kw):
    cfg = ExperimentConfig(
        topology=TopologyConfig(num_R=12, num_U=120, u_outbound=4, r_outbound=3, num_buckets=4),
        workload=WorkloadConfig(num_txs=20),
        run=RunConfig(seed=3),
    )
    for k, v in kw.items():
        cfg = cfg.with_value(k, v)
    return cfg


def full_coverage(result):
    honest = result.topology.honest_ids()
    return all(all(math.isfinite(result.receipts[tx.txid][h]) for h in honest) for tx in result.transactions)


def test_retaining_proxies_trigger_reproxy_but_not_starvation():
    cfg = small_proxy_config()
    cfg = cfg.with_value("adversary.enabled", True)
    cfg = cfg.with_value("adversary.num_spy_R", 0)
    cfg = cfg.with_value("adversary.num_adv_U", 30)
    cfg = cfg.with_value("adversary.behavior", "retain_proxied")
    result = simulate(cfg)
    assert result.counters.retained > 0
    assert result.counters.retries > 0
    assert result.quiescent and full_coverage(result)


# ----------------------------------------------------------------- create


def test_active_origin_first_wire_event_is_proxy_push():
    result = simulate(small_proxy_config(**{"run.trace": True}))
    origins = {tx.txid: tx.origin for tx in result.transactions}
    first_sent = {}
    for line in result.trace:
        p = line.split()
        if p[2] == "deliver" and p[3] != "addr":
            tx, frm = int(p[4]), int(p[5])
            if frm == origins[tx]:
                key = (float(p[8]), int(p[1]))
                if tx not in first_sent or key < first_sent[tx][0]:
                    first_sent[tx] = (key, p[3])
    assert first_sent and all(kind == "proxy" for _, kind in first_sent.values())


def test_diffusion_mode_announces_to_every_peer_immediately():
    topo = r_hub([0, 1, 2], r_out_peers=2)
    net = network(topo, mode="diffusion")
    net.on_create(2.0, 0, 0)
    msgs = queued(net, DELIVER)
    assert sorted(m[6] for m in msgs) == [1, 2, 3, 4, 5]
    assert all(m[3] == MSG_ANNOUNCE and m[0] > 2.0 + 0.1 for m in msgs)


# ---------------------------------------------------------------- receive


def test_p_zero_gives_single_hop_paths():
    cfg = small_proxy_config(**{"protocol.p": 0.0, "workload.num_txs": 200, "run.diffusion_flood": False})
    result = simulate(cfg)
    assert {h for _, _, h in result.first_diffusion.values()} == {1}


def test_hop_count_follows_geometric_law():
    cfg = ExperimentConfig(
        topology=TopologyConfig(num_R=300, num_U=3000),
        protocol=ProtocolParams(p=0.5),
        workload=WorkloadConfig(num_txs=10_000, creation_rate=10.0),
        run=RunConfig(seed=11, diffusion_flood=False),
    )
    result = simulate(cfg)
    hops = [h for _, _, h in result.first_diffusion.values()]
    assert len(hops) == 10_000
    assert sum(hops) / len(hops) == pytest.approx(1 / (1 - 0.5), rel=0.05)
    # closed-form tail P(H >= 3) = p^2 for an independent Monte Carlo cross-check
    assert sum(h >= 3 for h in hops) / len(hops) == pytest.approx(0.25, abs=0.02)


def test_wrong_class_proxy_push_is_diffused_and_counted():
    topo = r_hub([0], r_out_peers=1)  # node 2 is an R peer of R node 0
    net = network(topo)
    net.on_deliver(1.0, 0, MSG_PROXY, 5, 2, 0, 1, 0.9, 1)
    assert net.counters.violations == 1
    assert net.states[0].phase_of[5] is Phase.DIFFUSED


def test_duplicate_proxy_push_is_ignored_without_coin_flip():
    topo = r_hub([0, 1])
    net = network(topo, p=0.5)
    net.on_epoch_tick(0)
    net.on_deliver(1.0, 0, MSG_PROXY, 5, 1, 0, 0, 0.9, 1)
    state = net.rng._r.getstate()
    net.on_deliver(2.0, 1, MSG_PROXY, 5, 2, 0, 1, 1.9, 1)
    assert net.rng._r.getstate() == state
    assert net.counters.duplicate_proxy == 1


def test_proxy_never_bounces_back_to_sender():
    topo = r_hub([0, 1])
    net = network(topo, p=0.999)
    net.states[0].proxy_set = [1, 2]
    for tx in range(200):
        net.on_deliver(1.0, tx, MSG_PROXY, tx, 1, 0, 0, 0.9, 1)
    assert {it[6] for it in queued(net, DELIVER)} == {2}


# ---------------------------------------------------------------- diffuse


def test_isolated_node_schedules_nothing():
    net = network(make_topology([("R", 0)], []), mode="diffusion")
    net.on_create(0.0, 0, 0)
    assert queued(net) == []


def test_star_delays_are_exponential_plus_latency():
    lats = [0.05, 0.1, 0.2, 0.3]
    topo = make_topology([("R", 0)] + [("U", 0)] * 4, [(i + 1, 0, lat) for i, lat in enumerate(lats)])
    net = network(topo, seed=4, mode="diffusion", diffusion_rate_lambda=2.0)
    net.on_create(1.0, 0, 0)
    oracle = SeededRng(4)
    expected = {i + 1: 1.0 + oracle.expovariate(2.0) + lat for i, lat in enumerate(lats)}
    got = {it[6]: it[0] for it in queued(net, DELIVER)}
    assert got == pytest.approx(expected)


def test_line_of_three_matches_hand_computation():
    topo = make_topology([("R", 0), ("R", 0), ("R", 0)], [(0, 1, 0.1), (1, 2, 0.2)])
    params = ProtocolParams(mode="diffusion", diffusion_rate_lambda=1.0)
    result = run(topo, params, NO_ADV, [Transaction(0, 0, 1.0)], seed=9, trace=True)
    draws = SeededRng(9).derive("protocol")
    t1 = 1.0 + draws.expovariate(1.0) + 0.1
    t2 = t1 + draws.expovariate(1.0) + 0.2
    assert result.receipts[0] == pytest.approx([1.0, t1, t2])
    assert 1.0 < t1 < t2


def _dijkstra_oracle(trace, num_nodes, origin, created):
    """First-receipt times from the per-message delays in the trace, ignoring event order."""
    delay = {}
    for line in trace:
        p = line.split()
        if p[2] == "deliver":
            frm, to, sent = int(p[5]), int(p[6]), float(p[8])
            delay.setdefault((frm, to), float(p[0]) - sent)
    best = [math.inf] * num_nodes
    best[origin] = created
    heap = [(created, origin)]
    while heap:
        t, v = heapq.heappop(heap)
        if t > best[v]:
            continue
        for (a, b), d in delay.items():
            if a == v and t + d < best[b]:
                best[b] = t + d
                heapq.heappush(heap, (best[b], b))
    return best


@pytest.mark.parametrize("seed", range(10))
def test_complete_graph_coverage_matches_resimulation(seed):
    links = [(a, b, 0.05 + 0.05 * (a + b)) for a in range(4) for b in range(a + 1, 4)]
    topo = make_topology([("R", 0)] * 4, links)
    params = ProtocolParams(mode="diffusion", diffusion_rate_lambda=1.0)
    result = run(topo, params, NO_ADV, [Transaction(0, seed % 4, 0.5)], seed=seed, trace=True)
    assert all(math.isfinite(t) for t in result.receipts[0])
    oracle = _dijkstra_oracle(result.trace, 4, seed % 4, 0.5)
    assert result.receipts[0] == pytest.approx(oracle, abs=1e-12)


# ------------------------------------------------------------- invariants


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.sampled_from([0.0, 0.3, 0.8]))
def test_liveness_and_concealment_in_honest_runs(seed, p):
    cfg = small_proxy_config(**{"protocol.p": p, "run.trace": True})
    cfg = cfg.with_value("adversary.enabled", True)
    result = simulate(cfg, seed)
    assert result.quiescent and full_coverage(result)
    from txrelay.metrics import concealment_violations, first_spy_estimate

    assert concealment_violations(result, first_spy_estimate(result.observations)) == []
    # rebroadcast symmetry: relaying proxies arm timeouts as the origin does
    origins = {tx.txid: tx.origin for tx in result.transactions}
    timeouts = [tuple(map(int, l.split()[3:5])) for l in result.trace if l.split()[2] == "timeout"]
    assert any(node == origins[tx] for node, tx in timeouts)
    if p > 0:
        assert any(node != origins[tx] for node, tx in timeouts)


def test_logonly_adversarial_u_behaves_like_honest_u():
    cfg = small_proxy_config(**{"run.trace": True})
    from txrelay.engine import build_world

    topo, workload = build_world(cfg, 3)
    target = topo.honest_ids()[-1]
    nodes = list(topo.nodes)
    nodes[target] = type(nodes[target])(target, nodes[target].reachability, nodes[target].bucket, Role.ADVERSARY_UNREACHABLE)
    spied = type(topo)(tuple(nodes), topo.links)
    adv = AdversaryConfig(enabled=True, behavior="log_only")
    honest_run = run(topo, cfg.protocol, NO_ADV, workload, 3, trace=True)
    spied_run = run(spied, cfg.protocol, adv, workload, 3, trace=True)
    assert honest_run.trace == spied_run.trace
    assert spied_run.observations and not honest_run.observations


def test_diffusion_mode_has_zero_hops():
    result = simulate(small_proxy_config(**{"protocol.mode": "diffusion"}))
    assert {h for _, _, h in result.first_diffusion.values()} == {0}
