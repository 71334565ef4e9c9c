"""EF1 + envy-freeable allocations of mixed goods and chores.

Dispatch after the initial bundling:

* ``empty``       no items;
* ``chores-only`` every item is a chore for every agent;
* ``I``           at least ``n`` chores remain: each meta-good is glued to a
                  distinct chore (the injection with the lexicographically best
                  round values wins) and everything is handed out by iterative
                  perfect matching;
* ``II.1``        no chores remain (possibly after refinement): meta-goods are
                  made good-minimal and handed out by iterative matching;
* ``II.2``        1..n-1 chores remain after refinement: each chore is paired
                  with a set of goods, one perfect matching picks who carries
                  the chores, and the leftover goods go to the other agents.

The two searches are exhaustive up to ``budget`` candidates.  ``heuristic=True``
replaces them by hill climbing over single re-attachment moves.
"""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Callable, Iterable, Optional, Sequence

from efmix.bundling import (
    BundlingState,
    is_chore_maximal,
    is_objective_chore,
    iterative_item_merge,
    refine,
    supporters,
)
from efmix.exceptions import InvariantViolation, PreconditionError, SearchBudgetExceeded
from efmix.matching import (
    MatchingTrace,
    MetaItem,
    imwm,
    imwpm,
    perfect_assignment_int,
)
from efmix.model import DiscreteAllocation, Instance, bundle_value

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 10 ** 6

EMPTY = "empty"
CHORES_ONLY = "chores-only"
CASE_I = "I"
CASE_II_1 = "II.1"
CASE_II_2 = "II.2"


@dataclass
class SolveCertificate:
    """What the solver chose, enough to rebuild the allocation without searching.

    ``chosen_map`` is, for case I, the chore position (into ``sorted(chores)``)
    glued to each meta-good; for case II.2, one slot per element of
    ``bundling.elements`` (0 = left over, ``s`` = attached to the ``s``-th chore).
    """

    case: str
    bundling: BundlingState
    chosen_map: Optional[tuple[int, ...]] = None
    traces: list[MatchingTrace] = field(default_factory=list)
    heuristic: bool = False
    dummy_agents: tuple[int, ...] = ()


def _allocation_from_traces(inst: Instance, traces: Iterable[MatchingTrace]) -> DiscreteAllocation:
    bundles = [set() for _ in range(inst.n)]
    for trace in traces:
        for agent in trace.agents:
            bundles[agent] |= trace.bundle(agent)
    return DiscreteAllocation(tuple(frozenset(b) for b in bundles))


def _dummies(count: int) -> list[MetaItem]:
    return [MetaItem.dummy() for _ in range(count)]


def _padding(size: int, n: int) -> int:
    return (-size) % n


# -- candidate search --------------------------------------------------------

def _best_in_chunk(score: Callable, chunk: Sequence[tuple]) -> tuple:
    best_key, best = None, None
    for cand in chunk:
        key = score(cand)
        if best_key is None or key > best_key:
            best_key, best = key, cand
    return best_key, best


def _exhaustive(candidates: Iterable[tuple], score: Callable, workers: int) -> tuple:
    """Highest-scoring candidate; ties go to the first in enumeration order."""
    if workers <= 1:
        return _best_in_chunk(score, candidates)
    cands = list(candidates)
    size = max(1, math.ceil(len(cands) / (workers * 4)))
    chunks = [cands[k:k + size] for k in range(0, len(cands), size)]
    best_key, best = None, None
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for key, cand in pool.map(partial(_best_in_chunk, score), chunks):
            if best_key is None or key > best_key:
                best_key, best = key, cand
    return best_key, best


def _hill_climb(start: tuple, neighbours: Callable, score: Callable) -> tuple:
    current, current_key = start, score(start)
    improved = True
    while improved:
        improved = False
        for cand in neighbours(current):
            key = score(cand)
            if key > current_key:
                current, current_key = cand, key
                improved = True
                break
    return current_key, current


# -- chores only -----------------------------------------------------------

def _chores_only_trace(inst: Instance) -> MatchingTrace:
    pool = [MetaItem.singleton_chore(c) for c in range(inst.m)]
    pool += _dummies(_padding(len(pool), inst.n))
    return imwpm(inst, pool)


def solve_chores_only(inst: Instance) -> DiscreteAllocation:
    """Iterative perfect matching over chores padded with zero-valued dummies."""
    bad = [t for t in range(inst.m) if not is_objective_chore(inst, t)]
    if bad:
        raise PreconditionError(f"items {bad} are not chores for every agent")
    if inst.m == 0:
        return DiscreteAllocation.empty(inst.n)
    return _allocation_from_traces(inst, [_chores_only_trace(inst)])


# -- case I ------------------------------------------------------------------

def _case_one_pool(state: BundlingState, n: int, phi: Sequence[int]) -> list[MetaItem]:
    chores = sorted(state.chores)
    used = {chores[p] for p in phi}
    pool = [MetaItem.meta_chore(s, chores[p]) for s, p in zip(state.meta_goods, phi)]
    pool += [MetaItem.singleton_chore(c) for c in chores if c not in used]
    return pool + _dummies(_padding(len(pool), n))


def _case_one_score(inst: Instance, state: BundlingState, phi: tuple) -> tuple:
    return imwpm(inst, _case_one_pool(state, inst.n, phi)).values


def _injection_neighbours(k: int, phi: tuple):
    used = set(phi)
    for r in range(len(phi)):
        for p in range(k):
            if p not in used:
                yield phi[:r] + (p,) + phi[r + 1:]
    for r1, r2 in itertools.combinations(range(len(phi)), 2):
        swapped = list(phi)
        swapped[r1], swapped[r2] = swapped[r2], swapped[r1]
        yield tuple(swapped)


def check_meta_chores_reach_supporters(inst: Instance, trace: MatchingTrace) -> None:
    """Every meta-chore must end up with an agent who values its meta-good >= 0."""
    for agent in trace.agents:
        for item in trace.received(agent):
            if item.kind == "meta-chore" and agent not in supporters(inst, item.attached):
                raise InvariantViolation(
                    f"meta-chore {sorted(item.items)} went to non-supporter {agent}")


def solve_case_one(inst: Instance, state: BundlingState, *, budget: int = DEFAULT_BUDGET,
                   heuristic: bool = False, workers: int = 1):
    """At least ``n`` chores: glue meta-goods to chores, then iterative perfect matching."""
    chores = sorted(state.chores)
    k, ell = len(chores), len(state.meta_goods)
    if k < inst.n:
        raise PreconditionError(f"case I needs at least n={inst.n} chores, got {k}")
    for s in state.meta_goods:
        if not is_chore_maximal(inst, s, chores):
            raise PreconditionError(f"meta-good {sorted(s)} is not chore-maximal")
    score = partial(_case_one_score, inst, state)
    count = math.perm(k, ell)
    if heuristic:
        _, phi = _hill_climb(tuple(range(ell)), partial(_injection_neighbours, k), score)
    else:
        if count > budget:
            raise SearchBudgetExceeded(
                f"{count} injections exceed the search budget of {budget}")
        _, phi = _exhaustive(itertools.permutations(range(k), ell), score, workers)
    trace = imwpm(inst, _case_one_pool(state, inst.n, phi))
    check_meta_chores_reach_supporters(inst, trace)
    alloc = _allocation_from_traces(inst, [trace])
    return alloc, SolveCertificate(CASE_I, state, tuple(phi), [trace], heuristic)


# -- case II.1 ---------------------------------------------------------------

def make_good_minimal(inst: Instance, meta_goods: Sequence[frozenset],
                      loose: Iterable[int] = ()) -> list[frozenset]:
    """Loose goods become singleton meta-goods; offending goods are split off."""
    metas = list(meta_goods) + [frozenset((g,)) for g in sorted(loose)]
    while True:
        for j, s in enumerate(metas):
            hit = None
            for i in range(inst.n):
                total = bundle_value(inst, i, s)
                for g in sorted(s):
                    x = inst.utilities[i][g]
                    if x >= 0 and total - x > 0:
                        hit = g
                        break
                if hit is not None:
                    break
            if hit is not None:
                metas[j] = s - {hit}
                metas.append(frozenset((hit,)))
                break
        else:
            return metas


def solve_case_two_zero(inst: Instance, state: BundlingState):
    """No chores left: good-minimal meta-goods, then iterative matching."""
    if state.chores:
        raise PreconditionError("case II.1 requires no remaining chores")
    metas = make_good_minimal(inst, state.meta_goods, state.loose_goods)
    trace = imwm(inst, range(inst.n), [MetaItem.meta_good(s) for s in metas])
    alloc = _allocation_from_traces(inst, [trace])
    final = BundlingState(tuple(metas))
    return alloc, SolveCertificate(CASE_II_1, final, None, [trace])


# -- case II.2 ---------------------------------------------------------------

class _PairingTable:
    """Integer-scaled values for scoring chore/goods pairings quickly."""

    def __init__(self, inst: Instance, state: BundlingState):
        self.n = inst.n
        self.chores = sorted(state.chores)
        self.elements = state.elements
        den = 1
        for row in inst.utilities:
            for x in row:
                den = math.lcm(den, x.denominator)
        self.chore_val = [[int(inst.utilities[r][c] * den) for c in self.chores]
                          for r in range(inst.n)]
        self.elem_val = [[int(bundle_value(inst, r, e) * den) for e in self.elements]
                         for r in range(inst.n)]
        self.den = den

    def matrix(self, slots: Sequence[int]) -> list[list[int]]:
        k = len(self.chores)
        w = []
        for r in range(self.n):
            row = list(self.chore_val[r]) + [0] * (self.n - k)
            ev = self.elem_val[r]
            for e, s in enumerate(slots):
                if s:
                    row[s - 1] += ev[e]
            w.append(row)
        return w

    def score(self, slots: tuple) -> tuple[int, int]:
        w = self.matrix(slots)
        cols = perfect_assignment_int(w)
        return sum(w[r][cols[r]] for r in range(self.n)), sum(1 for s in slots if s)


def _slot_neighbours(k: int, slots: tuple):
    for e in range(len(slots)):
        for s in range(k + 1):
            if s != slots[e]:
                yield slots[:e] + (s,) + slots[e + 1:]


def _case_two_pos_build(inst: Instance, state: BundlingState, slots: Sequence[int]):
    table = _PairingTable(inst, state)
    chores, elements = table.chores, table.elements
    k = len(chores)
    w = table.matrix(slots)
    cols = perfect_assignment_int(w)
    carried = [frozenset().union(*(elements[e] for e, s in enumerate(slots) if s == i + 1))
               for i in range(k)]
    pool = [MetaItem.meta_chore(carried[i], chores[i]) for i in range(k)] + _dummies(inst.n - k)
    value = sum((Fraction(w[r][cols[r]], table.den) for r in range(inst.n)), Fraction(0))
    first = MatchingTrace(tuple(range(inst.n)), [(tuple(pool[c] for c in cols), value)])
    dummy_agents = tuple(r for r in range(inst.n) if cols[r] >= k)
    leftover = [MetaItem.meta_good(elements[e]) for e, s in enumerate(slots) if s == 0]
    second = imwm(inst, dummy_agents, leftover)
    return first, second, dummy_agents


def check_case_two_observations(inst: Instance, state: BundlingState, slots: Sequence[int],
                                first: MatchingTrace, dummy_agents: Sequence[int]) -> None:
    """Receivers like each attached element, carriers dislike every leftover, and
    every chore bundle is negative for everyone."""
    elements = state.elements
    chores = sorted(state.chores)
    carriers = [r for r in range(inst.n) if r not in dummy_agents]
    for r in carriers:
        item = first.rounds[0][0][r]
        slot = chores.index(item.chore) + 1
        for e, s in enumerate(slots):
            if s == slot and bundle_value(inst, r, elements[e]) < 0:
                raise InvariantViolation(f"agent {r} dislikes attached element {sorted(elements[e])}")
        for r2 in range(inst.n):
            if bundle_value(inst, r2, item.items) >= 0:
                raise InvariantViolation(f"chore bundle {sorted(item.items)} not negative for {r2}")
    for e, s in enumerate(slots):
        if s == 0:
            for r in carriers:
                if bundle_value(inst, r, elements[e]) >= 0:
                    raise InvariantViolation(
                        f"carrier {r} values leftover {sorted(elements[e])} non-negatively")


def solve_case_two_pos(inst: Instance, state: BundlingState, *, budget: int = DEFAULT_BUDGET,
                       heuristic: bool = False, workers: int = 1):
    """1..n-1 chores after refinement: pick goods to ride along with each chore.

    Every element (loose good or meta-good) is attached to one chore or left
    over.  The pairing maximising the perfect-matching value of chores plus
    ``n - k`` dummies wins, ties broken toward more attached elements and then
    the first pairing in enumeration order.  Each element tries chore 1, ...,
    chore k and finally "left over", so early elements and early chores are
    preferred.
    """
    k = len(state.chores)
    if not 1 <= k <= inst.n - 1:
        raise PreconditionError(f"case II.2 needs 1..n-1 chores, got {k}")
    table = _PairingTable(inst, state)
    size = len(table.elements)
    count = (k + 1) ** size
    if heuristic:
        _, slots = _hill_climb((0,) * size, partial(_slot_neighbours, k), table.score)
    else:
        if count > budget:
            raise SearchBudgetExceeded(f"{count} pairings exceed the search budget of {budget}")
        _, slots = _exhaustive(itertools.product((*range(1, k + 1), 0), repeat=size),
                                table.score, workers)
    first, second, dummy_agents = _case_two_pos_build(inst, state, slots)
    check_case_two_observations(inst, state, slots, first, dummy_agents)
    alloc = _allocation_from_traces(inst, [first, second])
    cert = SolveCertificate(CASE_II_2, state, tuple(slots), [first, second], heuristic, dummy_agents)
    return alloc, cert


# -- entry point -------------------------------------------------------------

def classify(inst: Instance) -> tuple[str, BundlingState]:
    """Which case an instance falls in, with the bundling that case starts from."""
    if inst.m == 0:
        return EMPTY, BundlingState(())
    if all(is_objective_chore(inst, t) for t in range(inst.m)):
        return CHORES_ONLY, BundlingState((), frozenset(), frozenset(range(inst.m)))
    state = iterative_item_merge(inst)
    if len(state.chores) >= inst.n:
        return CASE_I, state
    if not state.chores:
        return CASE_II_1, state
    refined = refine(inst, state)
    if not refined.chores:
        return CASE_II_1, refined
    return CASE_II_2, refined


def solve_ef1_envy_freeable(inst: Instance, *, budget: int = DEFAULT_BUDGET,
                            heuristic: bool = False, workers: int = 1):
    """Return an allocation that is EF1 and envy-freeable, with its certificate."""
    case, state = classify(inst)
    logger.debug("dispatching to case %s", case)
    if case == EMPTY:
        return DiscreteAllocation.empty(inst.n), SolveCertificate(EMPTY, state)
    if case == CHORES_ONLY:
        trace = _chores_only_trace(inst)
        return (_allocation_from_traces(inst, [trace]),
                SolveCertificate(CHORES_ONLY, state, None, [trace]))
    if case == CASE_I:
        return solve_case_one(inst, state, budget=budget, heuristic=heuristic, workers=workers)
    if case == CASE_II_1:
        return solve_case_two_zero(inst, state)
    return solve_case_two_pos(inst, state, budget=budget, heuristic=heuristic, workers=workers)


def replay(inst: Instance, cert: SolveCertificate) -> DiscreteAllocation:
    """Rebuild the allocation from a certificate's recorded choices, without search."""
    if cert.case == EMPTY:
        return DiscreteAllocation.empty(inst.n)
    if cert.case == CHORES_ONLY:
        return _allocation_from_traces(inst, [_chores_only_trace(inst)])
    if cert.case == CASE_I:
        trace = imwpm(inst, _case_one_pool(cert.bundling, inst.n, cert.chosen_map))
        return _allocation_from_traces(inst, [trace])
    if cert.case == CASE_II_1:
        trace = imwm(inst, range(inst.n), [MetaItem.meta_good(s) for s in cert.bundling.meta_goods])
        return _allocation_from_traces(inst, [trace])
    if cert.case == CASE_II_2:
        first, second, _ = _case_two_pos_build(inst, cert.bundling, cert.chosen_map)
        return _allocation_from_traces(inst, [first, second])
    raise ValueError(f"unknown case {cert.case!r}")
