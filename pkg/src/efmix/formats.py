"""JSON documents exchanged at the command-line boundary.

Numbers always travel as rational strings (``"p/q"`` or ``"p"``).
"""
from __future__ import annotations

import json
import os
import tempfile
from typing import Any, Mapping, Optional

from efmix.bundling import BundlingState
from efmix.exceptions import InstanceParseError
from efmix.matching import MatchingTrace, MetaItem
from efmix.model import (
    CakePiece,
    DiscreteAllocation,
    Instance,
    MixedAllocation,
    format_ratio,
    parse_ratio,
)
from efmix.solver import SolveCertificate
from efmix.verify import FairnessReport


def allocation_to_dict(inst: Instance, a: DiscreteAllocation,
                       payments=None, pieces=None) -> dict:
    doc: dict[str, Any] = {
        "bundles": {inst.agents[i]: [inst.items[t] for t in sorted(a[i])] for i in range(inst.n)}
    }
    if payments is not None:
        doc["payments"] = {inst.agents[i]: format_ratio(p) for i, p in enumerate(payments)}
    if pieces is not None:
        doc["pieces"] = {
            inst.agents[i]: [[format_ratio(s), format_ratio(e)] for s, e in piece.intervals]
            for i, piece in enumerate(pieces)
        }
    return doc


def mixed_to_dict(inst: Instance, mixed: MixedAllocation) -> dict:
    return allocation_to_dict(inst, mixed.discrete, mixed.payments, mixed.pieces)


def parse_allocation(inst: Instance, doc: Mapping[str, Any]):
    """Read an allocation document against ``inst``.

    Returns ``(discrete, payments or None, pieces or None)``.  Unknown ids,
    missing agents, duplicated or unallocated items raise
    :class:`InstanceParseError`.
    """
    agent_ix = {a: i for i, a in enumerate(inst.agents)}
    item_ix = {t: k for k, t in enumerate(inst.items)}
    try:
        raw = doc["bundles"]
    except (KeyError, TypeError) as exc:
        raise InstanceParseError("allocation needs a 'bundles' object") from exc
    if set(raw) != set(agent_ix):
        raise InstanceParseError("allocation agents do not match the instance")
    bundles = [frozenset() for _ in range(inst.n)]
    seen: set[int] = set()
    for agent, items in raw.items():
        idx = []
        for t in items:
            if t not in item_ix:
                raise InstanceParseError(f"unknown item id {t!r}")
            if item_ix[t] in seen:
                raise InstanceParseError(f"item {t!r} allocated twice")
            seen.add(item_ix[t])
            idx.append(item_ix[t])
        bundles[agent_ix[agent]] = frozenset(idx)
    if len(seen) != inst.m:
        missing = sorted(inst.items[t] for t in set(range(inst.m)) - seen)
        raise InstanceParseError(f"items not allocated: {missing}")
    discrete = DiscreteAllocation(tuple(bundles))

    payments = None
    if doc.get("payments") is not None:
        if set(doc["payments"]) - set(agent_ix):
            raise InstanceParseError("payments name unknown agents")
        payments = tuple(parse_ratio(doc["payments"].get(a, "0")) for a in inst.agents)
        if any(p < 0 for p in payments):
            raise InstanceParseError("payments must be non-negative")
    pieces = None
    if doc.get("pieces") is not None:
        if set(doc["pieces"]) - set(agent_ix):
            raise InstanceParseError("pieces name unknown agents")
        try:
            pieces = tuple(
                CakePiece(tuple((parse_ratio(s), parse_ratio(e))
                                for s, e in doc["pieces"].get(a, [])))
                for a in inst.agents)
        except ValueError as exc:
            raise InstanceParseError(str(exc)) from exc
    return discrete, payments, pieces


def _ids(inst: Instance, items) -> list[str]:
    return [inst.items[t] for t in sorted(items)]


def _meta_item_to_dict(inst: Instance, item: Optional[MetaItem]):
    if item is None:
        return None
    doc: dict[str, Any] = {"kind": item.kind, "items": _ids(inst, item.items)}
    if item.chore is not None:
        doc["chore"] = inst.items[item.chore]
    return doc


def trace_to_dict(inst: Instance, trace: MatchingTrace) -> dict:
    return {
        "agents": [inst.agents[i] for i in trace.agents],
        "rounds": [
            {"value": format_ratio(value),
             "assignment": {inst.agents[i]: _meta_item_to_dict(inst, item)
                            for i, item in zip(trace.agents, items)}}
            for items, value in trace.rounds
        ],
    }


def certificate_to_dict(inst: Instance, cert: SolveCertificate) -> dict:
    b = cert.bundling
    return {
        "case": cert.case,
        "heuristic": cert.heuristic,
        "bundling": {
            "meta_goods": [_ids(inst, s) for s in b.meta_goods],
            "loose_goods": _ids(inst, b.loose_goods),
            "chores": _ids(inst, b.chores),
        },
        "chosen_map": list(cert.chosen_map) if cert.chosen_map is not None else None,
        "dummy_agents": [inst.agents[i] for i in cert.dummy_agents],
        "traces": [trace_to_dict(inst, t) for t in cert.traces],
    }


def certificate_from_dict(inst: Instance, doc: Mapping[str, Any]) -> SolveCertificate:
    """Recover the replayable part of a certificate (case, bundling, choices)."""
    item_ix = {t: k for k, t in enumerate(inst.items)}
    agent_ix = {a: i for i, a in enumerate(inst.agents)}
    try:
        b = doc["bundling"]
        state = BundlingState(
            tuple(frozenset(item_ix[t] for t in s) for s in b["meta_goods"]),
            frozenset(item_ix[t] for t in b["loose_goods"]),
            frozenset(item_ix[t] for t in b["chores"]),
        )
        chosen = doc.get("chosen_map")
        return SolveCertificate(
            doc["case"], state, tuple(int(x) for x in chosen) if chosen is not None else None,
            [], bool(doc.get("heuristic", False)),
            tuple(agent_ix[a] for a in doc.get("dummy_agents", [])))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceParseError(f"malformed certificate: {exc}") from exc


def report_to_dict(inst: Instance, report: FairnessReport) -> dict:
    return {
        "verdict": report.verdict,
        "witnesses": [[inst.agents[i], inst.agents[j], reason]
                      for i, j, reason in report.witnesses],
    }


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
