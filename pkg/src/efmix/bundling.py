"""Grouping items into meta-goods before matching.

Two procedures live here: the initial merge, which leaves every agent
supporting at most one meta-good and makes meta-goods absorb chores while
someone still values the result non-negatively, and the refinement used when
fewer chores than agents remain, which additionally makes meta-goods
good-minimal and lets chores absorb any profitable set of goods.

Whenever a loop may pick among several candidates, the lowest index wins.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from efmix.exceptions import PreconditionError
from efmix.model import Instance, bundle_value

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BundlingState:
    meta_goods: tuple[frozenset, ...]
    loose_goods: frozenset = frozenset()
    chores: frozenset = frozenset()

    def covers(self, m: int) -> bool:
        """Meta-goods, loose goods and chores partition ``range(m)``."""
        parts = list(self.meta_goods) + [self.loose_goods, self.chores]
        return sum(len(p) for p in parts) == m and frozenset().union(*parts) == frozenset(range(m))

    @property
    def elements(self) -> list[frozenset]:
        """Loose goods as singletons, then meta-goods: the pool goods are drawn from."""
        return [frozenset((g,)) for g in sorted(self.loose_goods)] + list(self.meta_goods)


def is_objective_chore(inst: Instance, t: int) -> bool:
    return all(inst.utilities[i][t] < 0 for i in range(inst.n))


def supporters(inst: Instance, s: Iterable[int]) -> frozenset:
    """Agents who value ``s`` non-negatively."""
    s = tuple(s)
    return frozenset(i for i in range(inst.n) if bundle_value(inst, i, s) >= 0)


def is_meta_good(inst: Instance, s: Iterable[int]) -> bool:
    s = frozenset(s)
    return bool(s) and bool(supporters(inst, s))


def supporter_sets_disjoint(inst: Instance, meta_goods: Sequence[Iterable[int]]) -> bool:
    seen: set[int] = set()
    for s in meta_goods:
        t = supporters(inst, s)
        if seen & t:
            return False
        seen |= t
    return True


def is_chore_maximal(inst: Instance, s: Iterable[int], chores: Iterable[int]) -> bool:
    """Adding any one of ``chores`` to ``s`` makes it negative for every agent."""
    s = frozenset(s)
    if not is_meta_good(inst, s):
        raise PreconditionError(f"{sorted(s)} is not a meta-good")
    for c in chores:
        if c in s:
            continue
        for j in range(inst.n):
            if bundle_value(inst, j, s) + inst.utilities[j][c] >= 0:
                return False
    return True


def _good_minimality_violation(inst: Instance, s: frozenset) -> Optional[tuple[int, int]]:
    # (agent, good) such that the agent still values s minus that good positively
    for i in range(inst.n):
        total = bundle_value(inst, i, s)
        for g in sorted(s):
            x = inst.utilities[i][g]
            if x >= 0 and total - x > 0:
                return i, g
    return None


def is_good_minimal(inst: Instance, s: Iterable[int]) -> bool:
    """Dropping any item an agent values non-negatively leaves that agent at <= 0."""
    s = frozenset(s)
    if not is_meta_good(inst, s):
        raise PreconditionError(f"{sorted(s)} is not a meta-good")
    return _good_minimality_violation(inst, s) is None


def best_value_with_chore(inst: Instance, agent: int, elements: Iterable[Iterable[int]],
                          c: int) -> Fraction:
    """max over subsets S of ``elements`` of the agent's value for S plus chore c.

    Under additive utilities the maximiser takes exactly the elements with
    positive value, so this is exact without enumerating subsets.
    """
    best = inst.utilities[agent][c]
    for e in elements:
        x = bundle_value(inst, agent, e)
        if x > 0:
            best += x
    return best


def iterative_item_merge(inst: Instance) -> BundlingState:
    """Initial bundling into meta-goods with pairwise-disjoint supporter sets.

    While some agent values two or more current nodes non-negatively, all of
    that agent's non-negatively valued nodes are merged into one.  Afterwards
    meta-goods absorb objective chores for as long as some agent still values
    the enlarged meta-good non-negatively.
    """
    nodes: list[frozenset] = [frozenset((t,)) for t in range(inst.m)
                              if not is_objective_chore(inst, t)]
    chores = [t for t in range(inst.m) if is_objective_chore(inst, t)]

    while True:
        for i in range(inst.n):
            liked = [k for k, s in enumerate(nodes) if bundle_value(inst, i, s) >= 0]
            if len(liked) >= 2:
                merged = frozenset().union(*(nodes[k] for k in liked))
                first = liked[0]
                nodes = [merged if k == first else s for k, s in enumerate(nodes)
                         if k == first or k not in liked]
                break
        else:
            break

    absorbed = True
    while chores and absorbed:
        absorbed = False
        for j, s in enumerate(nodes):
            for c in chores:
                if any(bundle_value(inst, i, s) + inst.utilities[i][c] >= 0 for i in range(inst.n)):
                    nodes[j] = s | {c}
                    chores.remove(c)
                    absorbed = True
                    break
            if absorbed:
                break
    return BundlingState(tuple(nodes), frozenset(), frozenset(chores))


def _merge_to_fixpoint(inst: Instance, metas: list[frozenset]) -> list[frozenset]:
    while True:
        for i in range(inst.n):
            liked = [k for k, s in enumerate(metas) if bundle_value(inst, i, s) >= 0]
            if len(liked) >= 2:
                r, r2 = liked[0], liked[1]
                metas = [metas[r] | metas[r2] if k == r else s
                         for k, s in enumerate(metas) if k != r2]
                break
        else:
            return metas


def refine(inst: Instance, state: BundlingState) -> BundlingState:
    """Make meta-goods good-minimal and chore-maximal when 1..n-1 chores remain.

    Repeats until neither guard fires: (a) some meta-good is not good-minimal,
    in which case the offending good is moved to the loose goods; (b) some
    agent values a remaining chore together with some subset of loose goods and
    meta-goods non-negatively, in which case that subset and chore become a new
    meta-good.  After each step, meta-goods sharing a supporter are merged.
    """
    if not 1 <= len(state.chores) <= inst.n - 1:
        raise PreconditionError(
            f"refine needs between 1 and n-1 chores, got {len(state.chores)}")
    metas = list(state.meta_goods)
    loose = set(state.loose_goods)
    chores = sorted(state.chores)
    metas = _merge_to_fixpoint(inst, metas)

    while True:
        peeled = False
        for j, s in enumerate(metas):
            hit = _good_minimality_violation(inst, s)
            if hit is not None:
                _, g = hit
                metas[j] = s - {g}
                loose.add(g)
                peeled = True
                break
        if not peeled:
            if not chores:
                break
            absorption = None
            for i in range(inst.n):
                pool = [frozenset((g,)) for g in sorted(loose)] + metas
                for c in chores:
                    chosen = [e for e in pool if bundle_value(inst, i, e) >= 0]
                    if inst.utilities[i][c] + sum((bundle_value(inst, i, e) for e in chosen),
                                                  Fraction(0)) >= 0:
                        absorption = (c, chosen)
                        break
                if absorption is not None:
                    break
            if absorption is None:
                break
            c, chosen = absorption
            new = frozenset({c}).union(*chosen)
            metas = [s for s in metas if s not in chosen] + [new]
            loose -= new
            chores.remove(c)
            logger.debug("chore %d absorbed %s", c, sorted(new))
        metas = _merge_to_fixpoint(inst, metas)

    return BundlingState(tuple(metas), frozenset(loose), frozenset(chores))
