"""Independent oracles and shared fixtures for the test suite.

Everything here is written straight from the definitions, by enumeration or
grid integration, and does not call into the solver.
"""
from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction as F

from hypothesis import strategies as st

from efmix.model import DensitySegment, Instance

TWIN = Instance.from_matrix([[1, -1], [1, -1]])
UNIFORM = ((F(0), F(1), F(1)),)


def inst(rows, cake=None):
    return Instance.from_matrix(rows, cake=cake)


def brute_perfect(weights):
    """Best value, and the smallest assignment vector achieving it."""
    n = len(weights)
    best, arg = None, None
    for perm in itertools.permutations(range(n)):
        v = sum(F(weights[i][perm[i]]) for i in range(n))
        if best is None or v > best:
            best, arg = v, perm
    return best, arg


def brute_partial(weights):
    """Best (value, cardinality) over all matchings using only present edges.

    Among ties, the smallest assignment vector with "unmatched" ranked after
    every column wins.
    """
    a = len(weights)
    g = len(weights[0]) if a else 0
    best_key, arg = None, None
    for choice in itertools.product(range(g + 1), repeat=a):
        cols = [c for c in choice if c < g]
        if len(cols) != len(set(cols)):
            continue
        if any(c < g and weights[i][c] is None for i, c in enumerate(choice)):
            continue
        v = sum((F(weights[i][c]) for i, c in enumerate(choice) if c < g), F(0))
        key = (v, len(cols))
        if best_key is None or key > best_key:
            best_key, arg = key, tuple(c if c < g else None for c in choice)
    return best_key, arg


def grid_integral(segments, intervals):
    """Integrate a piecewise-constant density over a union of intervals.

    Uses midpoint evaluation on a grid fine enough that every breakpoint is a
    grid point, so the result is exact.
    """
    points = [x for s in segments for x in (s[0], s[1])]
    points += [x for iv in intervals for x in iv]
    den = math.lcm(*(F(x).denominator for x in points)) if points else 1
    step = F(1, 2 * den)
    total = F(0)
    for k in range(2 * den):
        lo, hi = k * step, (k + 1) * step
        mid = (lo + hi) / 2
        inside = any(F(s) <= mid < F(e) for s, e in intervals)
        if inside:
            density = sum((F(d) for s, e, d in segments if F(s) <= mid < F(e)), F(0))
            total += density * step
    return total


def simple_cycles(n):
    """Every directed simple cycle on ``n`` nodes, each listed once."""
    for size in range(2, n + 1):
        for nodes in itertools.combinations(range(n), size):
            head, rest = nodes[0], nodes[1:]
            for perm in itertools.permutations(rest):
                yield (head,) + perm


def cycle_weight(w, cycle):
    return sum(w[cycle[k]][cycle[(k + 1) % len(cycle)]] for k in range(len(cycle)))


def welfare_max_by_permutation(values):
    """values[i][j] = u_i(A_j); True iff the identity maximises welfare."""
    n = len(values)
    base = sum(values[i][i] for i in range(n))
    return all(sum(values[i][p[i]] for i in range(n)) <= base
               for p in itertools.permutations(range(n)))


def random_allocation(rng: random.Random, n: int, m: int):
    from efmix.model import DiscreteAllocation
    owner = [rng.randrange(n) for _ in range(m)]
    return DiscreteAllocation(tuple(frozenset(t for t in range(m) if owner[t] == i)
                                    for i in range(n)))


def random_segments(rng: random.Random, grid: int = 12, max_segments: int = 3):
    k = rng.randint(1, max_segments)
    pts = sorted(rng.sample(range(grid + 1), 2 * k))
    return tuple(DensitySegment(F(s, grid), F(e, grid), F(rng.randint(1, 4), rng.randint(1, 3)))
                 for s, e in zip(pts[::2], pts[1::2]))


# -- hypothesis strategies ---------------------------------------------------

small_utils = st.integers(min_value=-3, max_value=3).map(F)


@st.composite
def instances(draw, max_agents=4, max_items=6, min_agents=1, values=small_utils):
    n = draw(st.integers(min_value=min_agents, max_value=max_agents))
    m = draw(st.integers(min_value=0, max_value=max_items))
    rows = [[draw(values) for _ in range(m)] for _ in range(n)]
    return Instance.from_matrix(rows)


@st.composite
def instances_with_allocation(draw, max_agents=4, max_items=6, min_agents=1):
    from efmix.model import DiscreteAllocation
    i = draw(instances(max_agents, max_items, min_agents))
    owner = [draw(st.integers(0, i.n - 1)) for _ in range(i.m)]
    a = DiscreteAllocation(tuple(frozenset(t for t in range(i.m) if owner[t] == k)
                                 for k in range(i.n)))
    return i, a


@st.composite
def mixed_instances(draw, max_agents=4, max_items=7, min_agents=2):
    """Instances where each item is an objective chore with probability about 1/2."""
    n = draw(st.integers(min_value=min_agents, max_value=max_agents))
    m = draw(st.integers(min_value=1, max_value=max_items))
    cols = []
    for _ in range(m):
        if draw(st.booleans()):
            cols.append([draw(st.integers(-3, -1)) for _ in range(n)])
        else:
            cols.append([draw(st.integers(-3, 3)) for _ in range(n)])
    return Instance.from_matrix([[F(cols[t][i]) for t in range(m)] for i in range(n)])


def round_monotonicity_violations(i, trace):
    """Pairs (t, t') where some agent prefers a later-round item to their own."""
    bad = []
    from efmix.model import bundle_value
    for t, (items, _) in enumerate(trace.rounds):
        for t2 in range(t + 1, len(trace.rounds)):
            for x, mine in zip(trace.agents, items):
                own = bundle_value(i, x, mine.items) if mine is not None else 0
                for other in trace.rounds[t2][0]:
                    if other is not None and bundle_value(i, x, other.items) > own:
                        bad.append((x, t, t2))
    return bad


def structural_violations(i, alloc, cert):
    """Recheck the case-specific structure of a solver result from scratch."""
    from efmix.bundling import supporters
    from efmix.model import DiscreteAllocation, bundle_value

    bad = []
    if cert.case == "I":
        for trace in cert.traces:
            for x in trace.agents:
                for item in trace.received(x):
                    if item.kind == "meta-chore" and x not in supporters(i, item.attached):
                        bad.append(f"claim 4.1: {sorted(item.items)} to {x}")
    if cert.case == "II.2":
        first = cert.traces[0]
        dummies = set(cert.dummy_agents)
        carriers = [x for x in range(i.n) if x not in dummies]
        elements = cert.bundling.elements
        chores = sorted(cert.bundling.chores)
        leftover = [elements[e] for e, s in enumerate(cert.chosen_map) if s == 0]
        for x, item in zip(first.agents, first.rounds[0][0]):
            if x in dummies:
                if item.kind != "dummy":
                    bad.append(f"dummy agent {x} got {item.kind}")
                continue
            slot = chores.index(item.chore) + 1
            for e, s in enumerate(cert.chosen_map):
                if s == slot and bundle_value(i, x, elements[e]) < 0:
                    bad.append(f"obs 1: {x} dislikes {sorted(elements[e])}")
            for r in range(i.n):
                if bundle_value(i, r, item.items) >= 0:
                    bad.append(f"obs 3: {r} likes chore bundle {sorted(item.items)}")
        for e in leftover:
            for x in carriers:
                if bundle_value(i, x, e) >= 0:
                    bad.append(f"obs 2: carrier {x} likes leftover {sorted(e)}")
        q = DiscreteAllocation(tuple(alloc[x] if x not in dummies else frozenset()
                                     for x in range(i.n)))
        w = DiscreteAllocation(tuple(alloc[x] if x in dummies else frozenset()
                                     for x in range(i.n)))
        for name, part in (("Q", q), ("W", w)):
            values = [[bundle_value(i, x, part[y]) for y in range(i.n)] for x in range(i.n)]
            if not welfare_max_by_permutation(values):
                bad.append(f"{name}-part not envy-freeable")
    for trace in cert.traces:
        bad += [f"round monotonicity {v}" for v in round_monotonicity_violations(i, trace)]
    return bad
