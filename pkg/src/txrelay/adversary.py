"""Eavesdropping adversary: observation log and the first-spy estimator."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .config import AdversaryConfig

__all__ = [
    "Action",
    "AdversaryConfig",
    "FirstSpyReport",
    "Observation",
    "adversarial_behavior",
    "first_spy_estimate",
    "observations_from_csv",
    "observations_to_csv",
    "record",
]


class Observation(NamedTuple):
    txid: int
    observed_at: float
    from_node: int
    msg_kind: str
    seq: int = 0
    receiver: int = -1


class Action(str, enum.Enum):
    FOLLOW_PROTOCOL = "follow_protocol"
    RETAIN = "retain"


@dataclass
class FirstSpyReport:
    accusations: dict[int, int] = field(default_factory=dict)
    first_seen: dict[int, float] = field(default_factory=dict)
    # reachability class ("R"/"U") of each accused node, when known
    accused_class: dict[int, str] = field(default_factory=dict)


def record(
    observations: list[Observation],
    txid: int,
    time: float,
    sender: int,
    receiver: int,
    msg_kind: str,
    seq: int = 0,
) -> Observation:
    """Append what an adversarial receiver saw; pooled across all spies."""
    obs = Observation(txid, time, sender, msg_kind, seq, receiver)
    observations.append(obs)
    return obs


def first_spy_estimate(
    observations: Iterable[Observation],
    reachability: dict[int, str] | None = None,
) -> FirstSpyReport:
    """Accuse, for every observed tx, the sender of its earliest observation.

    Ties in time go to the lower ``seq``.
    """
    best: dict[int, tuple[float, int, int]] = {}
    for obs in observations:
        key = (obs.observed_at, obs.seq)
        cur = best.get(obs.txid)
        if cur is None or key < cur[:2]:
            best[obs.txid] = (obs.observed_at, obs.seq, obs.from_node)
    report = FirstSpyReport()
    for txid in sorted(best):
        t, _, sender = best[txid]
        report.accusations[txid] = sender
        report.first_seen[txid] = t
        if reachability is not None and sender in reachability:
            report.accused_class[txid] = reachability[sender]
    return report


def adversarial_behavior(config: AdversaryConfig, msg_kind: str) -> Action:
    """What an adversarial node does with a message it just received."""
    if msg_kind == "proxy" and config.behavior == "retain_proxied":
        return Action.RETAIN
    return Action.FOLLOW_PROTOCOL


CSV_HEADER = ("txid", "observed_at", "from_node", "msg_kind")


def observations_to_csv(observations: Iterable[Observation]) -> str:
    """Serialise in dispatch order; row order doubles as the seq tie-break."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for obs in sorted(observations, key=lambda o: o.seq):
        writer.writerow((obs.txid, repr(obs.observed_at), obs.from_node, obs.msg_kind))
    return buf.getvalue()


def observations_from_csv(text: str) -> list[Observation]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"expected header {','.join(CSV_HEADER)}")
    return [
        Observation(int(row["txid"]), float(row["observed_at"]), int(row["from_node"]), row["msg_kind"], i)
        for i, row in enumerate(reader)
    ]
