"""Exact maximum-weight bipartite matching and the iterative matching procedures.

Weights are rationals.  They are scaled by their common denominator and the
deterministic tie-breaks are folded into the integer weights as lower-order
digits, so one run of the Hungarian algorithm returns the tie-broken optimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from efmix.exceptions import PreconditionError
from efmix.model import Instance, bundle_value

DUMMY = "dummy"
CHORE = "chore"
META_GOOD = "meta-good"
META_CHORE = "meta-chore"


@dataclass(frozen=True)
class MetaItem:
    """A group of items treated as one node of a matching graph.

    ``chore`` is the attached objective chore of a meta-chore; the remaining
    items are the attached goods, which a receiver takes along with it.
    """

    kind: str
    items: frozenset = frozenset()
    chore: Optional[int] = None

    @classmethod
    def dummy(cls) -> "MetaItem":
        return cls(DUMMY)

    @classmethod
    def singleton_chore(cls, c: int) -> "MetaItem":
        return cls(CHORE, frozenset((c,)), c)

    @classmethod
    def meta_good(cls, items: Iterable[int]) -> "MetaItem":
        return cls(META_GOOD, frozenset(items))

    @classmethod
    def meta_chore(cls, goods: Iterable[int], c: int) -> "MetaItem":
        return cls(META_CHORE, frozenset(goods) | {c}, c)

    @property
    def attached(self) -> frozenset:
        """Items other than the carrying chore (the meta-good of a meta-chore)."""
        if self.chore is None:
            return self.items
        return self.items - {self.chore}


@dataclass(frozen=True)
class RoundMatching:
    """One round: ``assignment[i]`` is a column index into that round's items, or None."""

    assignment: tuple[Optional[int], ...]
    value: Fraction


@dataclass
class MatchingTrace:
    """Per-round matchings plus what each agent received, as MetaItems."""

    agents: tuple[int, ...]
    rounds: list[tuple[tuple[Optional[MetaItem], ...], Fraction]] = field(default_factory=list)

    def received(self, agent: int) -> list[MetaItem]:
        k = self.agents.index(agent)
        return [r[0][k] for r in self.rounds if r[0][k] is not None]

    def bundle(self, agent: int) -> frozenset:
        out: set[int] = set()
        for item in self.received(agent):
            out |= item.items
        return frozenset(out)

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(v for _, v in self.rounds)


# -- Hungarian core ----------------------------------------------------------

def _hungarian_min(cost: Sequence[Sequence[int]]) -> list[int]:
    """Minimum-cost assignment of rows to columns for an ``n x m`` matrix, n <= m.

    Shortest-augmenting-path Hungarian with potentials; exact on Python ints.
    Returns ``col_of_row``.
    """
    n = len(cost)
    m = len(cost[0]) if n else 0
    inf = None  # sentinel for "unbounded"
    u = [0] * (n + 1)
    v = [0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv: list = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            row = cost[i0 - 1]
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if minv[j] is inf or cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if delta is inf or minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = [0] * n
    for j in range(1, m + 1):
        if p[j]:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row


def _scale(weights: Sequence[Sequence[Fraction]]) -> list[list[int]]:
    den = 1
    for row in weights:
        for x in row:
            den = math.lcm(den, Fraction(x).denominator)
    return [[int(Fraction(x) * den) for x in row] for row in weights]


def perfect_assignment_int(scaled: Sequence[Sequence[int]]) -> list[int]:
    """Tie-broken optimal column per row for a square integer weight matrix."""
    n = len(scaled)
    if n == 0:
        return []
    span = n ** n
    # composite = weight * n^n - (lexicographic code of the assignment)
    cost = [[-(scaled[i][j] * span - j * n ** (n - 1 - i)) for j in range(n)]
            for i in range(n)]
    return _hungarian_min(cost)


def max_weight_perfect_matching(weights: Sequence[Sequence[Fraction]]) -> RoundMatching:
    """Maximum-weight perfect matching of a square matrix.

    Among optimal matchings the lexicographically smallest assignment vector
    (row 0's column first) is returned.

    >>> max_weight_perfect_matching([[-1, -2], [-7, -2]])
    RoundMatching(assignment=(0, 1), value=Fraction(-3, 1))
    """
    n = len(weights)
    if any(len(row) != n for row in weights):
        raise PreconditionError("max_weight_perfect_matching needs a square matrix")
    cols = perfect_assignment_int(_scale(weights))
    value = sum((Fraction(weights[i][cols[i]]) for i in range(n)), Fraction(0))
    return RoundMatching(tuple(cols), value)


def max_weight_matching(weights: Sequence[Sequence[Optional[Fraction]]]) -> RoundMatching:
    """Maximum-weight (not necessarily perfect) matching of agents to goods.

    ``weights[i][j]`` is ``None`` where there is no edge; present edges must be
    non-negative.  Ties go to larger cardinality, then to the lexicographically
    smallest assignment vector (unmatched ranks after every column).
    """
    a = len(weights)
    g = len(weights[0]) if a else 0
    if a == 0 or g == 0:
        return RoundMatching(tuple(None for _ in range(a)), Fraction(0))
    present = [[Fraction(0) if x is None else Fraction(x) for x in row] for row in weights]
    if any(x is not None and x < 0 for row in weights for x in row):
        raise PreconditionError("max_weight_matching expects non-negative edge weights")
    scaled = _scale(present)
    lex_base = g + 1
    card_unit = lex_base ** a
    weight_unit = (a + 1) * card_unit
    size = a + g
    comp = [[0] * size for _ in range(size)]
    for i in range(a):
        digit = lex_base ** (a - 1 - i)
        for j in range(size):
            if j < g:
                if weights[i][j] is None:
                    comp[i][j] = None
                else:
                    comp[i][j] = scaled[i][j] * weight_unit + card_unit - j * digit
            else:
                comp[i][j] = -g * digit
    bound = sum(abs(x) for row in comp for x in row if x is not None) + 1
    cost = [[bound if x is None else -x for x in row] for row in comp]
    cols = _hungarian_min(cost)
    assignment = tuple(cols[i] if cols[i] < g and weights[i][cols[i]] is not None else None
                       for i in range(a))
    value = sum((present[i][j] for i, j in enumerate(assignment) if j is not None), Fraction(0))
    return RoundMatching(assignment, value)


# -- iterative procedures ----------------------------------------------------

def _item_value(inst: Instance, agent: int, item: MetaItem) -> Fraction:
    return bundle_value(inst, agent, item.items)


def imwpm(inst: Instance, pool: Sequence[MetaItem],
          agents: Optional[Sequence[int]] = None) -> MatchingTrace:
    """Iterative maximum-weight perfect matching over a padded pool.

    Each round every agent receives exactly one remaining MetaItem; the pool
    size must be a multiple of the number of agents.  Ties between optimal
    round matchings are resolved so that the whole vector of round values is
    lexicographically largest.  That is one assignment problem: items go to
    (round, agent) slots and round t is weighted by base**(T-1-t), with the
    base large enough that no later round can outweigh an earlier one.
    """
    agents = tuple(agents) if agents is not None else tuple(range(inst.n))
    k = len(agents)
    if k == 0 or len(pool) % k:
        raise PreconditionError(f"pool size {len(pool)} is not a multiple of {k} agents")
    trace = MatchingTrace(agents)
    if not pool:
        return trace
    rounds = len(pool) // k
    values = [[_item_value(inst, i, h) for h in pool] for i in agents]
    scaled = _scale(values)
    base = 2 * k * max(1, max(abs(x) for row in scaled for x in row)) + 1
    big = [[x * base ** (rounds - 1 - t) for x in scaled[a]]
           for t in range(rounds) for a in range(k)]
    cols = perfect_assignment_int(big)
    for t in range(rounds):
        picked = cols[t * k:(t + 1) * k]
        value = sum((values[a][c] for a, c in enumerate(picked)), Fraction(0))
        trace.rounds.append((tuple(pool[c] for c in picked), value))
    return trace


def imwm(inst: Instance, agents: Sequence[int], goods: Sequence[MetaItem]) -> MatchingTrace:
    """Iterative maximum-weight matching of meta-goods to a subset of agents.

    An agent is only ever matched to a meta-good they value non-negatively;
    agents left unmatched in a round receive nothing that round.
    """
    agents = tuple(agents)
    for h in goods:
        if all(_item_value(inst, i, h) < 0 for i in agents):
            raise PreconditionError(
                f"meta-good {sorted(h.items)} is valued negatively by every agent")
    trace = MatchingTrace(agents)
    remaining = list(goods)
    while remaining:
        w = []
        for i in agents:
            row = []
            for h in remaining:
                x = _item_value(inst, i, h)
                row.append(x if x >= 0 else None)
            w.append(row)
        rm = max_weight_matching(w)
        trace.rounds.append((tuple(remaining[c] if c is not None else None
                                   for c in rm.assignment), rm.value))
        taken = {c for c in rm.assignment if c is not None}
        remaining = [h for c, h in enumerate(remaining) if c not in taken]
    return trace
