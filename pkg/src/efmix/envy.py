"""Envy graphs, positive-cycle detection and heaviest-path subsidies."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from efmix.exceptions import InstanceTooLargeError, PositiveCycleError
from efmix.model import DiscreteAllocation, Instance, bundle_value

PERMUTATION_GUARD = 8


@dataclass(frozen=True)
class EnvyGraph:
    """Complete weighted digraph; ``w[a][b]`` is how much node ``a`` envies node ``b``.

    ``nodes`` maps graph positions back to agent indices of the instance.
    """

    nodes: tuple[int, ...]
    w: tuple[tuple[Fraction, ...], ...]

    @property
    def n(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_weights(cls, w) -> "EnvyGraph":
        rows = tuple(tuple(Fraction(x) for x in row) for row in w)
        return cls(tuple(range(len(rows))), rows)


def build_envy_graph(inst: Instance, a: DiscreteAllocation,
                     subset: Optional[Iterable[int]] = None) -> EnvyGraph:
    nodes = tuple(sorted(subset)) if subset is not None else tuple(range(inst.n))
    w = []
    for i in nodes:
        own = bundle_value(inst, i, a[i])
        w.append(tuple(Fraction(0) if j == i else bundle_value(inst, i, a[j]) - own
                       for j in nodes))
    return EnvyGraph(nodes, tuple(w))


def _relax(g: EnvyGraph, rounds: int) -> tuple[list[Fraction], bool]:
    # Longest-path relaxation from a virtual source joined to every node by a
    # zero edge; returns the labels and whether the last round still improved.
    best = [Fraction(0)] * g.n
    changed = False
    for _ in range(rounds):
        changed = False
        for i in range(g.n):
            row = g.w[i]
            for j in range(g.n):
                if i != j and row[j] + best[j] > best[i]:
                    best[i] = row[j] + best[j]
                    changed = True
        if not changed:
            break
    return best, changed


def has_positive_cycle(g: EnvyGraph) -> bool:
    """True iff some directed cycle has strictly positive total weight.

    >>> has_positive_cycle(EnvyGraph.from_weights([[0, 2], [-8, 0]]))
    False
    >>> has_positive_cycle(EnvyGraph.from_weights([[0, 2], [-1, 0]]))
    True
    """
    if g.n < 2:
        return False
    _, still_changing = _relax(g, g.n)
    return still_changing


def envy_freeable_by_permutation(inst: Instance, a: DiscreteAllocation,
                                 subset: Optional[Iterable[int]] = None) -> bool:
    """Welfare of ``a`` is maximal over every reassignment of its bundles.

    Enumerates ``n!`` permutations, so it is guarded at ``n <= 8``; it exists to
    cross-check :func:`has_positive_cycle`.
    """
    agents = sorted(subset) if subset is not None else list(range(inst.n))
    if len(agents) > PERMUTATION_GUARD:
        raise InstanceTooLargeError(
            f"permutation oracle limited to {PERMUTATION_GUARD} agents, got {len(agents)}")
    value = [[bundle_value(inst, i, a[j]) for j in agents] for i in agents]
    k = len(agents)
    base = sum(value[i][i] for i in range(k))
    for perm in itertools.permutations(range(k)):
        if sum(value[i][perm[i]] for i in range(k)) > base:
            return False
    return True


def heaviest_path_payments(g: EnvyGraph) -> tuple[Fraction, ...]:
    """Subsidy ``q[i]`` = weight of the heaviest path leaving node ``i``.

    The empty path counts, so every entry is non-negative.  Raises
    :class:`PositiveCycleError` when the heaviest path is unbounded.

    >>> heaviest_path_payments(EnvyGraph.from_weights([[0, 1], [-2, 0]]))
    (Fraction(1, 1), Fraction(0, 1))
    """
    if g.n < 2:
        return tuple(Fraction(0) for _ in range(g.n))
    best, still_changing = _relax(g, g.n)
    if still_changing:
        raise PositiveCycleError("envy graph has a positive-weight cycle")
    return tuple(best)
