"""Core types, exact rational parsing, and bundle / cake valuation.

Every number in this package is a :class:`fractions.Fraction`; nothing in the
core touches floating point.  Agents and items are indexed ``0..n-1`` and
``0..m-1`` internally; the string ids of the input document are kept on the
:class:`Instance` for round-tripping.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

from efmix.exceptions import InstanceParseError

Ratio = Fraction
Bundle = frozenset  # of item indices

_RATIO_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_ratio(value: Any) -> Fraction:
    """Parse ``"p/q"``, an integer string, or a Python int into a Fraction.

    Decimal strings and floats are rejected so that no rounding can sneak in.

    >>> parse_ratio("3/2")
    Fraction(3, 2)
    >>> parse_ratio("-4")
    Fraction(-4, 1)
    >>> parse_ratio("6/4")
    Fraction(3, 2)
    """
    if isinstance(value, bool):
        raise InstanceParseError(f"malformed rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if not isinstance(value, str):
        raise InstanceParseError(f"malformed rational: {value!r}")
    match = _RATIO_RE.match(value)
    if match is None:
        raise InstanceParseError(f"malformed rational string: {value!r}")
    num, den = match.groups()
    if den is not None and int(den) == 0:
        raise InstanceParseError(f"zero denominator in {value!r}")
    return Fraction(int(num), int(den) if den is not None else 1)


def format_ratio(r: Fraction) -> str:
    """Canonical string form: ``"p/q"``, or ``"p"`` when the denominator is 1."""
    r = Fraction(r)
    if r.denominator == 1:
        return str(r.numerator)
    return f"{r.numerator}/{r.denominator}"


@dataclass(frozen=True)
class DensitySegment:
    """A constant density on the half-open stretch ``[start, end)`` of the cake."""

    start: Fraction
    end: Fraction
    density: Fraction

    def __post_init__(self):
        if not (0 <= self.start < self.end <= 1):
            raise InstanceParseError(
                f"segment [{self.start}, {self.end}] must satisfy 0 <= start < end <= 1")
        if self.density < 0:
            raise InstanceParseError(f"negative density {self.density}")

    @property
    def value(self) -> Fraction:
        return self.density * (self.end - self.start)


@dataclass(frozen=True)
class Instance:
    """Agents, items, an ``n x m`` utility matrix, and optional cake densities.

    ``cake`` is ``None`` for an items-only instance; otherwise it holds one
    tuple of :class:`DensitySegment` per agent (an empty tuple means the agent
    values the whole cake at zero).
    """

    agents: tuple[str, ...]
    items: tuple[str, ...]
    utilities: tuple[tuple[Fraction, ...], ...]
    cake: Optional[tuple[tuple[DensitySegment, ...], ...]] = None

    def __post_init__(self):
        if len(self.agents) < 1:
            raise InstanceParseError("at least one agent is required")
        if len(set(self.agents)) != len(self.agents):
            raise InstanceParseError("duplicate agent ids")
        if len(set(self.items)) != len(self.items):
            raise InstanceParseError("duplicate item ids")
        if len(self.utilities) != len(self.agents):
            raise InstanceParseError("utility matrix must have one row per agent")
        for row in self.utilities:
            if len(row) != len(self.items):
                raise InstanceParseError("utility matrix must have one column per item")
        if self.cake is not None:
            if len(self.cake) != len(self.agents):
                raise InstanceParseError("cake must list densities for every agent")
            for segments in self.cake:
                for prev, nxt in zip(segments, segments[1:]):
                    if nxt.start < prev.end:
                        raise InstanceParseError("overlapping or unsorted density segments")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return len(self.items)

    @property
    def has_cake(self) -> bool:
        return self.cake is not None

    @classmethod
    def from_matrix(cls, utilities: Sequence[Sequence[Any]],
                    cake: Optional[Sequence[Sequence[tuple]]] = None) -> "Instance":
        """Build an instance with default ids ``a0.., i0..`` from a nested list.

        ``cake`` entries are ``(start, end, density)`` triples per agent.
        """
        rows = tuple(tuple(parse_ratio(x) if not isinstance(x, Fraction) else x for x in row)
                     for row in utilities)
        n = len(rows)
        m = len(rows[0]) if rows else 0
        segs = None
        if cake is not None:
            segs = tuple(
                tuple(DensitySegment(parse_ratio(s), parse_ratio(e), parse_ratio(d))
                      for s, e, d in agent_segs)
                for agent_segs in cake)
        return cls(tuple(f"a{i}" for i in range(n)), tuple(f"i{t}" for t in range(m)), rows, segs)


@dataclass(frozen=True)
class CakePiece:
    """A finite union of disjoint closed intervals of ``[0, 1]``."""

    intervals: tuple[tuple[Fraction, Fraction], ...] = ()

    def __post_init__(self):
        ordered = sorted(self.intervals)
        for s, e in ordered:
            if not (0 <= s < e <= 1):
                raise ValueError(f"degenerate or out-of-range interval [{s}, {e}]")
        for (_, e1), (s2, _) in zip(ordered, ordered[1:]):
            if s2 < e1:
                raise ValueError("cake piece intervals overlap")

    @property
    def length(self) -> Fraction:
        return sum((e - s for s, e in self.intervals), Fraction(0))

    @classmethod
    def from_intervals(cls, intervals: Iterable[tuple[Fraction, Fraction]]) -> "CakePiece":
        """Sort, drop empty stretches, and merge touching intervals."""
        merged: list[list[Fraction]] = []
        for s, e in sorted((Fraction(s), Fraction(e)) for s, e in intervals):
            if s >= e:
                continue
            if merged and merged[-1][1] == s:
                merged[-1][1] = e
            else:
                merged.append([s, e])
        return cls(tuple((s, e) for s, e in merged))


@dataclass(frozen=True)
class DiscreteAllocation:
    """A tuple of ``n`` disjoint bundles (frozensets of item indices)."""

    bundles: tuple[frozenset, ...]

    def __post_init__(self):
        object.__setattr__(self, "bundles", tuple(frozenset(b) for b in self.bundles))
        seen: set[int] = set()
        for b in self.bundles:
            if seen & b:
                raise ValueError("bundles overlap")
            seen |= b

    def __len__(self):
        return len(self.bundles)

    def __getitem__(self, i: int) -> frozenset:
        return self.bundles[i]

    def __iter__(self):
        return iter(self.bundles)

    def is_complete(self, m: int) -> bool:
        return sum(len(b) for b in self.bundles) == m and all(
            0 <= t < m for b in self.bundles for t in b)

    @classmethod
    def empty(cls, n: int) -> "DiscreteAllocation":
        return cls(tuple(frozenset() for _ in range(n)))


@dataclass(frozen=True)
class MixedAllocation:
    """A discrete allocation plus payments and/or cake pieces.

    :func:`efmix.division.solve_efm` fills both: ``payments`` are the money
    shares that the consensus pieces realise.
    """

    discrete: DiscreteAllocation
    payments: Optional[tuple[Fraction, ...]] = None
    pieces: Optional[tuple[CakePiece, ...]] = None

    def __post_init__(self):
        n = len(self.discrete)
        if self.payments is None and self.pieces is None:
            raise ValueError("a mixed allocation needs payments or cake pieces")
        if self.payments is not None:
            if len(self.payments) != n or any(p < 0 for p in self.payments):
                raise ValueError("payments must be n non-negative values")
        if self.pieces is not None:
            if len(self.pieces) != n:
                raise ValueError("need one cake piece per agent")
            spans = sorted(iv for piece in self.pieces for iv in piece.intervals)
            for (_, e1), (s2, _) in zip(spans, spans[1:]):
                if s2 < e1:
                    raise ValueError("cake pieces overlap")


# -- parsing ---------------------------------------------------------------

def parse_instance(doc: Union[str, Mapping[str, Any]]) -> Instance:
    """Parse an instance document (JSON text or an already-decoded mapping)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise InstanceParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise InstanceParseError("instance document must be an object")
    try:
        agents = tuple(str(a) for a in doc["agents"])
        raw_items = doc.get("items", [])
    except (KeyError, TypeError) as exc:
        raise InstanceParseError(f"missing field: {exc}") from exc
    if len(set(agents)) != len(agents):
        raise InstanceParseError("duplicate agent ids")

    item_ids: list[str] = []
    columns: list[list[Fraction]] = []
    for entry in raw_items:
        if not isinstance(entry, Mapping) or "id" not in entry or "utilities" not in entry:
            raise InstanceParseError(f"item entries need 'id' and 'utilities': {entry!r}")
        item_id = str(entry["id"])
        if item_id in item_ids:
            raise InstanceParseError(f"duplicate item id {item_id!r}")
        utils = entry["utilities"]
        unknown = set(utils) - set(agents)
        if unknown:
            raise InstanceParseError(f"item {item_id!r} names unknown agents {sorted(unknown)}")
        col = []
        for a in agents:
            if a not in utils:
                raise InstanceParseError(f"item {item_id!r} has no utility for agent {a!r}")
            col.append(parse_ratio(utils[a]))
        item_ids.append(item_id)
        columns.append(col)
    utilities = tuple(tuple(col[i] for col in columns) for i in range(len(agents)))

    cake = None
    if doc.get("cake") is not None:
        raw_cake = doc["cake"]
        unknown = set(raw_cake) - set(agents)
        if unknown:
            raise InstanceParseError(f"cake names unknown agents {sorted(unknown)}")
        per_agent = []
        for a in agents:
            segs = []
            for s in raw_cake.get(a, []):
                try:
                    segs.append(DensitySegment(parse_ratio(s["start"]), parse_ratio(s["end"]),
                                               parse_ratio(s["density"])))
                except KeyError as exc:
                    raise InstanceParseError(f"segment missing field {exc}") from exc
            segs.sort(key=lambda seg: seg.start)
            per_agent.append(tuple(segs))
        cake = tuple(per_agent)
    return Instance(agents, tuple(item_ids), utilities, cake)


def instance_to_dict(inst: Instance) -> dict:
    doc: dict[str, Any] = {
        "agents": list(inst.agents),
        "items": [
            {"id": item, "utilities": {a: format_ratio(inst.utilities[i][t])
                                       for i, a in enumerate(inst.agents)}}
            for t, item in enumerate(inst.items)
        ],
    }
    if inst.cake is not None:
        doc["cake"] = {
            a: [{"start": format_ratio(s.start), "end": format_ratio(s.end),
                 "density": format_ratio(s.density)} for s in segs]
            for a, segs in zip(inst.agents, inst.cake)
        }
    return doc


# -- valuation ---------------------------------------------------------------

def bundle_value(inst: Instance, agent: int, bundle: Iterable[int]) -> Fraction:
    """Additive value of a bundle; the empty bundle is worth 0."""
    row = inst.utilities[agent]
    return sum((row[t] for t in bundle), Fraction(0))


def cake_value(inst: Instance, agent: int, piece: CakePiece) -> Fraction:
    """Exact integral of the agent's piecewise-constant density over ``piece``."""
    if inst.cake is None:
        return Fraction(0)
    total = Fraction(0)
    for seg in inst.cake[agent]:
        for s, e in piece.intervals:
            lo, hi = max(s, seg.start), min(e, seg.end)
            if lo < hi:
                total += seg.density * (hi - lo)
    return total


def total_cake_value(inst: Instance, agent: int) -> Fraction:
    if inst.cake is None:
        return Fraction(0)
    return sum((seg.value for seg in inst.cake[agent]), Fraction(0))


WHOLE_CAKE = CakePiece(((Fraction(0), Fraction(1)),))


def normalize(inst: Instance) -> Instance:
    """Rescale each agent so their whole-cake value is exactly 1 (or stays 0).

    Item utilities and densities of an agent are scaled by the same factor, which
    leaves every comparison-based fairness verdict unchanged.  Items-only
    instances come back as-is.
    """
    if inst.cake is None:
        return inst
    rows = []
    cake = []
    for i in range(inst.n):
        v = total_cake_value(inst, i)
        if v == 0 or v == 1:
            rows.append(inst.utilities[i])
            cake.append(inst.cake[i])
            continue
        rows.append(tuple(x / v for x in inst.utilities[i]))
        cake.append(tuple(DensitySegment(s.start, s.end, s.density / v) for s in inst.cake[i]))
    return Instance(inst.agents, inst.items, tuple(rows), tuple(cake))


def breakpoints(inst: Instance) -> list[Fraction]:
    """Sorted union of 0, 1 and every segment endpoint of every agent."""
    points = {Fraction(0), Fraction(1)}
    if inst.cake is not None:
        for segs in inst.cake:
            for s in segs:
                points.add(s.start)
                points.add(s.end)
    return sorted(points)


def density_at(inst: Instance, agent: int, lo: Fraction, hi: Fraction) -> Fraction:
    """Density of ``agent`` on an elementary interval ``[lo, hi]`` (constant there)."""
    if inst.cake is None:
        return Fraction(0)
    for seg in inst.cake[agent]:
        if seg.start <= lo and hi <= seg.end:
            return seg.density
    return Fraction(0)
