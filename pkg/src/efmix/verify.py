"""Fairness checkers and brute-force oracles.

These evaluate the definitions literally over exact rationals.  They share
nothing with the solver beyond :mod:`efmix.model`, so they can be trusted to
judge its output.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from efmix.exceptions import InstanceTooLargeError
from efmix.model import (
    CakePiece,
    DiscreteAllocation,
    Instance,
    MixedAllocation,
    bundle_value,
    cake_value,
)

BRUTE_FORCE_BUDGET = 3 ** 7


@dataclass
class FairnessReport:
    """Verdict plus one ``(i, j, reason)`` witness for every violating ordered pair."""

    witnesses: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return not self.witnesses

    def __bool__(self) -> bool:
        return self.verdict


def _ef1_pair(inst: Instance, i: int, own: frozenset, other: frozenset) -> bool:
    u = inst.utilities[i]
    own_v = bundle_value(inst, i, own)
    other_v = bundle_value(inst, i, other)
    if own_v >= other_v:
        return True
    for t in own:
        if own_v - u[t] >= other_v:
            return True
    for t in other:
        if own_v >= other_v - u[t]:
            return True
    return False


def check_ef1(inst: Instance, a: DiscreteAllocation) -> FairnessReport:
    """Envy between any two agents vanishes after dropping one item from either bundle."""
    report = FairnessReport()
    for i in range(inst.n):
        for j in range(inst.n):
            if i != j and not _ef1_pair(inst, i, a[i], a[j]):
                report.witnesses.append((i, j, "ef1"))
    return report


def check_envy_free_money(inst: Instance, a: DiscreteAllocation, p: Sequence[Fraction],
                          agents: Optional[Iterable[int]] = None) -> FairnessReport:
    """Nobody prefers another agent's bundle plus payment to their own."""
    group = sorted(agents) if agents is not None else range(inst.n)
    report = FairnessReport()
    for i in group:
        mine = bundle_value(inst, i, a[i]) + p[i]
        for j in group:
            if i != j and mine < bundle_value(inst, i, a[j]) + p[j]:
                report.witnesses.append((i, j, "envy"))
    return report


def check_efm(inst: Instance, mixed: MixedAllocation,
              agents: Optional[Iterable[int]] = None) -> FairnessReport:
    """EFM: each pair is envy-free, or the envied share of the divisible good is
    worthless to the envier and EF1 holds on the items.

    Cake pieces are used when present; otherwise payments (money form, where the
    condition becomes "the envied agent received no money").  ``agents``
    restricts the pairs checked, e.g. to the agents the money was meant for.
    """
    group = sorted(agents) if agents is not None else list(range(inst.n))
    a = mixed.discrete
    use_cake = mixed.pieces is not None
    if use_cake:
        share = [[cake_value(inst, i, mixed.pieces[j]) for j in range(inst.n)]
                 for i in range(inst.n)]
    else:
        share = [list(mixed.payments) for _ in range(inst.n)]
    report = FairnessReport()
    for i in group:
        mine = bundle_value(inst, i, a[i]) + share[i][i]
        for j in group:
            if i == j or mine >= bundle_value(inst, i, a[j]) + share[i][j]:
                continue
            if share[i][j] != 0:
                report.witnesses.append((i, j, "cake clause" if use_cake else "money clause"))
            elif not _ef1_pair(inst, i, a[i], a[j]):
                report.witnesses.append((i, j, "ef1 clause"))
    return report


def is_envy_freeable(inst: Instance, a: DiscreteAllocation) -> bool:
    """Welfare-maximality over all bundle permutations (independent of :mod:`envy`)."""
    value = [[bundle_value(inst, i, a[j]) for j in range(inst.n)] for i in range(inst.n)]
    base = sum(value[i][i] for i in range(inst.n))
    return all(sum(value[i][s[i]] for i in range(inst.n)) <= base
               for s in itertools.permutations(range(inst.n)))


def all_allocations(n: int, m: int):
    """Every assignment of ``m`` items to ``n`` agents, in lexicographic order."""
    for owner in itertools.product(range(n), repeat=m):
        bundles = [[] for _ in range(n)]
        for t, i in enumerate(owner):
            bundles[i].append(t)
        yield DiscreteAllocation(tuple(frozenset(b) for b in bundles))


def brute_force_ef1_efable(inst: Instance,
                           budget: int = BRUTE_FORCE_BUDGET) -> Optional[DiscreteAllocation]:
    """First allocation (in enumeration order) that is EF1 and envy-freeable, if any."""
    if inst.n ** inst.m > budget:
        raise InstanceTooLargeError(f"{inst.n}^{inst.m} allocations exceed budget {budget}")
    for a in all_allocations(inst.n, inst.m):
        if check_ef1(inst, a) and is_envy_freeable(inst, a):
            return a
    return None


def check_complete(inst: Instance, a: DiscreteAllocation) -> bool:
    return len(a) == inst.n and a.is_complete(inst.m)


def check_cake_partition(pieces: Sequence[CakePiece]) -> bool:
    """Pieces are disjoint and together cover ``[0, 1]`` exactly."""
    spans = sorted(iv for piece in pieces for iv in piece.intervals)
    cursor = Fraction(0)
    for s, e in spans:
        if s != cursor:
            return False
        cursor = e
    return cursor == 1
