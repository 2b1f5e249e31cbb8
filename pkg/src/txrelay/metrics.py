"""Anonymity, latency and traffic metrics computed from a finished run."""

from __future__ import annotations

import json
import math
import statistics
from collections import defaultdict
from typing import Any, Iterable, Mapping, Sequence

from .adversary import FirstSpyReport, first_spy_estimate
from .engine import RunResult
from .topology import Reachability

__all__ = [
    "addr_traffic",
    "coverage_times",
    "first_diffusions_from_trace",
    "percentile",
    "receipts_from_trace",
    "report_json",
    "run_metrics",
    "score",
    "concealment_violations",
    "trace_message_counts",
]

SCHEMA = "txrelay.run/1"


def score(report: FirstSpyReport, ground_truth: Mapping[int, int]) -> dict[str, float | None]:
    created = len(ground_truth)
    accusations = len(report.accusations)
    correct = sum(1 for tx, who in report.accusations.items() if ground_truth.get(tx) == who)
    return {
        "accuracy": correct / created if created else None,
        "precision": correct / accusations if accusations else None,
        "recall": correct / created if created else None,
        "correct": correct,
        "accusations": accusations,
        "created": created,
    }


def coverage_times(
    receipts: Sequence[float],
    honest: Sequence[int],
    created_at: float,
) -> dict[str, float | None]:
    """Earliest times by which 50/90/100% of honest nodes hold the tx.

    ``receipts`` is indexed by node id with ``inf`` for nodes that never got it.
    """
    times = sorted(receipts[h] for h in honest)
    n = len(times)
    out: dict[str, float | None] = {}
    for label, frac in (("t50", 0.5), ("t90", 0.9), ("t100", 1.0)):
        if n == 0:
            out[label] = created_at
            continue
        need = max(1, math.ceil(frac * n - 1e-9))
        t = times[need - 1]
        out[label] = t if math.isfinite(t) else None
    return out


def percentile(values: Sequence[float], q: float) -> float | None:
    """Linear-interpolated percentile, ``q`` in [0, 100]."""
    vals = sorted(values)
    if not vals:
        return None
    pos = (len(vals) - 1) * q / 100.0
    lo = math.floor(pos)
    hi = min(lo + 1, len(vals) - 1)
    return vals[lo] + (vals[hi] - vals[lo]) * (pos - lo)


def addr_traffic(result: RunResult) -> dict[str, int]:
    """Address-gossip volume split by the reachability class of the address."""
    return {
        "originated_R": result.addr_originated["R"],
        "originated_U": result.addr_originated["U"],
        "originated": result.addr_originated["R"] + result.addr_originated["U"],
        "messages_R": result.addr_messages["R"],
        "messages_U": result.addr_messages["U"],
        "messages": result.addr_messages["R"] + result.addr_messages["U"],
    }


def concealment_violations(result: RunResult, report: FirstSpyReport) -> list[int]:
    """Txs the adversary first heard from their own origin before anyone else announced them.

    Only txs whose origin proxied with an adversary-free proxy set count.
    """
    bad = []
    for tx in result.transactions:
        if result.origin_exposed.get(tx.txid) is not False:
            continue
        if report.accusations.get(tx.txid) != tx.origin:
            continue
        first = result.first_diffusion.get(tx.txid)
        observed = report.first_seen[tx.txid]
        if first is None or first[1] == tx.origin or first[0] >= observed:
            bad.append(tx.txid)
    return bad


def _clean(x: Any) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def run_metrics(result: RunResult, config: Mapping[str, Any] | None = None, seed: int | None = None) -> dict[str, Any]:
    topo = result.topology
    honest = topo.honest_ids()
    reach = {n.id: n.reachability.value for n in topo.nodes}
    report = first_spy_estimate(result.observations, reach)
    truth = {tx.txid: tx.origin for tx in result.transactions}
    scores = score(report, truth)
    violations = set(concealment_violations(result, report))

    per_tx = []
    t90_lat, t100_lat, hops = [], [], []
    for tx in result.transactions:
        cov = coverage_times(result.receipts.get(tx.txid, [math.inf] * len(topo.nodes)), honest, tx.created_at)
        first = result.first_diffusion.get(tx.txid)
        proxy_hops = first[2] if first else None
        if proxy_hops is not None:
            hops.append(proxy_hops)
        if cov["t90"] is not None:
            t90_lat.append(cov["t90"] - tx.created_at)
        if cov["t100"] is not None:
            t100_lat.append(cov["t100"] - tx.created_at)
        accused = report.accusations.get(tx.txid)
        per_tx.append({
            "txid": tx.txid,
            "origin": tx.origin,
            "created_at": tx.created_at,
            "accused": accused,
            "accused_class": report.accused_class.get(tx.txid),
            "correct": accused == tx.origin,
            "proxy_hops": proxy_hops,
            "first_diffuser": first[1] if first else None,
            "first_diffusion_time": first[0] if first else None,
            "retries": result.tx_retries.get(tx.txid, 0),
            "origin_proxy_set_adversarial": result.origin_exposed.get(tx.txid),
            "concealment_violation": tx.txid in violations,
            **cov,
        })

    n_txs = len(result.transactions)
    full = sum(1 for row in per_tx if row["t100"] is not None)
    c = result.counters
    aggregates = {
        "num_txs": n_txs,
        "first_spy_accuracy": scores["accuracy"],
        "precision": scores["precision"],
        "recall": scores["recall"],
        "accusations": scores["accusations"],
        "correct_accusations": scores["correct"],
        "accusations_R": sum(1 for v in report.accused_class.values() if v == "R"),
        "accusations_U": sum(1 for v in report.accused_class.values() if v == "U"),
        "mean_hops": statistics.fmean(hops) if hops else None,
        "median_hops": statistics.median(hops) if hops else None,
        "full_coverage_txs": full,
        "full_coverage_fraction": full / n_txs if n_txs else None,
        "median_t90": percentile(t90_lat, 50),
        "p90_t90": percentile(t90_lat, 90),
        "mean_t90": statistics.fmean(t90_lat) if t90_lat else None,
        "median_t100": percentile(t100_lat, 50),
        "max_t100": max(t100_lat) if t100_lat else None,
        "messages_announce": result.msg_counts["announce"],
        "messages_proxy": result.msg_counts["proxy"],
        "messages_addr": result.msg_counts["addr"],
        "messages_total": sum(result.msg_counts.values()),
        "addr_message_count": addr_traffic(result)["messages"],
        "addr_originated": addr_traffic(result)["originated"],
        "addr_originated_R": result.addr_originated["R"],
        "addr_originated_U": result.addr_originated["U"],
        "violations": c.violations,
        "retries": c.retries,
        "fallbacks": c.fallbacks,
        "safety_valve_diffusions": c.safety_valve,
        "duplicate_proxy": c.duplicate_proxy,
        "retained": c.retained,
        "concealment_violations": len(violations),
        "observations": len(result.observations),
    }
    out: dict[str, Any] = {
        "schema": SCHEMA,
        "seed": seed,
        "quiescent": result.quiescent,
        "end_time": result.end_time,
        "topology": {
            "nodes": len(topo.nodes),
            "links": len(topo.links),
            "honest_R": len(topo.honest_ids(Reachability.R)),
            "honest_U": len(topo.honest_ids(Reachability.U)),
            "adversarial": sum(1 for n in topo.nodes if n.adversarial),
        },
        "aggregates": {k: _clean(v) for k, v in aggregates.items()},
        "transactions": [{k: _clean(v) for k, v in row.items()} for row in per_tx],
    }
    if config is not None:
        out["config"] = dict(config)
    return out


def report_json(metrics: Mapping[str, Any]) -> str:
    return json.dumps(metrics, sort_keys=True, indent=1) + "\n"


# -------------------------------------------------------- offline recompute


def _parse_deliveries(lines: Iterable[str]):
    for line in lines:
        yield line.split()


def receipts_from_trace(lines: Iterable[str], num_nodes: int) -> dict[int, list[float]]:
    """First-possession time per node for each tx, rebuilt from trace lines."""
    receipts: dict[int, list[float]] = {}
    for parts in _parse_deliveries(lines):
        kind = parts[2]
        if kind == "create":
            tx, origin = int(parts[3]), int(parts[4])
            receipts[tx] = [math.inf] * num_nodes
            receipts[tx][origin] = float(parts[0])
        elif kind == "deliver" and parts[3] != "addr":
            tx, to = int(parts[4]), int(parts[6])
            row = receipts[tx]
            t = float(parts[0])
            if t < row[to]:
                row[to] = t
    return receipts


def first_diffusions_from_trace(lines: Iterable[str]) -> dict[int, tuple[float, int, int]]:
    """``tx -> (time, node, proxy_hops)`` of the earliest announce sent, from a trace.

    A node's proxy depth is read off the first ProxyPush that reached it.
    """
    depth: dict[tuple[int, int], int] = {}
    origin: dict[int, int] = {}
    best: dict[int, tuple[float, int, int]] = {}
    for parts in _parse_deliveries(lines):
        kind = parts[2]
        if kind == "create":
            tx, node = int(parts[3]), int(parts[4])
            origin[tx] = node
            depth.setdefault((tx, node), 0)
        elif kind == "deliver" and parts[3] in ("announce", "proxy"):
            tx, frm, to = int(parts[4]), int(parts[5]), int(parts[6])
            sent, seq = float(parts[8]), int(parts[1])
            if parts[3] == "proxy":
                depth.setdefault((tx, to), int(parts[9]))
                continue
            cand = (sent, frm)
            cur = best.get(tx)
            if cur is None or cand < cur[:2]:
                best[tx] = (sent, frm, depth.get((tx, frm), 0))
    return best


def trace_message_counts(lines: Iterable[str]) -> dict[str, int]:
    counts: dict[str, int] = defaultdict(int)
    for parts in _parse_deliveries(lines):
        if parts[2] == "deliver":
            counts[parts[3]] += 1
    return {k: counts.get(k, 0) for k in ("announce", "proxy", "addr")}
