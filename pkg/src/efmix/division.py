"""Lifting an EF1 + envy-freeable item allocation to an EFM allocation with cake.

The recipe: normalise so every agent values the cake at 1 or 0, subsidise the
agents who value the cake with heaviest-path payments, squeeze those payments
into a budget of exactly 1, and realise each payment as a piece of cake that
*every* cake-valuing agent values at exactly that amount.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from efmix.envy import build_envy_graph, heaviest_path_payments
from efmix.exceptions import PreconditionError
from efmix.model import (
    WHOLE_CAKE,
    CakePiece,
    DiscreteAllocation,
    Instance,
    MixedAllocation,
    breakpoints,
    normalize,
    total_cake_value,
)
from efmix.solver import DEFAULT_BUDGET, SolveCertificate, solve_ef1_envy_freeable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RoundSchedule:
    """How a unit of money is spread over agents grouped by equal subsidy.

    ``levels`` are the distinct subsidies in decreasing order ending at 0 and
    ``groups[t]`` the agents sitting at ``levels[t]``.  ``final_round`` is the
    round in which the budget ran out (``None`` for the surplus case) and
    ``residual_share`` what each agent got in that round when it was truncated.
    """

    levels: tuple[Fraction, ...]
    groups: tuple[tuple[int, ...], ...]
    final_round: Optional[int]
    residual_share: Fraction


def payment_schedule(q: Mapping[int, Fraction]) -> tuple[dict[int, Fraction], RoundSchedule]:
    """Turn envy-eliminating subsidies ``q`` into payments summing to exactly 1.

    If the subsidies total at most 1 the surplus is shared equally.  Otherwise
    money is handed out in rounds: round ``r`` raises every agent in the ``r``
    richest groups by the gap to the next level, and the round where the
    budget runs short splits what is left equally.  Payments of agents with
    positive payment keep the pairwise differences of ``q``.

    >>> p, _ = payment_schedule({0: Fraction(3, 2), 1: Fraction(1, 2), 2: Fraction(0)})
    >>> [str(p[i]) for i in range(3)]
    ['1', '0', '0']
    """
    agents = sorted(q)
    if not agents:
        raise PreconditionError("need at least one paid agent")
    levels = sorted(set(q.values()), reverse=True)
    if levels[-1] != 0:
        levels.append(Fraction(0))
    groups = tuple(tuple(i for i in agents if q[i] == lv) for lv in levels)
    total = sum(q.values(), Fraction(0))
    if total <= 1:
        top_up = (1 - total) / len(agents)
        sched = RoundSchedule(tuple(levels), groups, None, Fraction(0))
        return {i: q[i] + top_up for i in agents}, sched

    pay = {i: Fraction(0) for i in agents}
    remaining = Fraction(1)
    funded: list[int] = []
    final_round, residual = None, Fraction(0)
    for r in range(len(levels) - 1):
        funded.extend(groups[r])
        step = levels[r] - levels[r + 1]
        cost = step * len(funded)
        if cost <= remaining:
            for i in funded:
                pay[i] += step
            remaining -= cost
            if remaining == 0:
                final_round = r
                break
        else:
            residual = remaining / len(funded)
            for i in funded:
                pay[i] += residual
            remaining = Fraction(0)
            final_round = r
            break
    return pay, RoundSchedule(tuple(levels), groups, final_round, residual)


def cake_valuers(inst: Instance) -> tuple[int, ...]:
    """Agents who value the whole (normalised) cake at 1."""
    return tuple(i for i in range(inst.n) if total_cake_value(inst, i) == 1)


def efm_money(inst: Instance, a: DiscreteAllocation,
              paid: Iterable[int]) -> tuple[Fraction, ...]:
    """Payments to ``paid`` summing to 1 such that nobody envies a paid agent.

    Agents outside ``paid`` receive 0.  Raises when the allocation restricted
    to ``paid`` is not envy-freeable.
    """
    paid = tuple(sorted(paid))
    g = build_envy_graph(inst, a, paid)
    q = heaviest_path_payments(g)
    pay, _ = payment_schedule(dict(zip(paid, q)))
    return tuple(pay.get(i, Fraction(0)) for i in range(inst.n))


def consensus_split(inst: Instance, shares: Mapping[int, Fraction]) -> dict[int, CakePiece]:
    """Cut the cake so every agent in ``shares`` values piece ``i`` at ``shares[i]``.

    The cake is cut at every density breakpoint of every agent; each resulting
    interval, on which all densities are constant, is sliced into consecutive
    parts of relative length ``shares[i]`` in agent order.  Any remainder
    (present only when the shares sum to less than 1) goes to the
    lowest-indexed agent.
    """
    if not shares:
        raise PreconditionError("no agents to split the cake among")
    total = sum(shares.values(), Fraction(0))
    if total > 1:
        raise PreconditionError(f"shares sum to {total} > 1")
    if any(s < 0 for s in shares.values()):
        raise PreconditionError("shares must be non-negative")
    for i in shares:
        if total_cake_value(inst, i) != 1:
            raise PreconditionError(f"agent {i} does not value the cake at exactly 1")
    agents = sorted(shares)
    parts: dict[int, list] = {i: [] for i in agents}
    points = breakpoints(inst)
    for lo, hi in zip(points, points[1:]):
        length = hi - lo
        cursor = lo
        for i in agents:
            if shares[i] > 0:
                nxt = cursor + shares[i] * length
                parts[i].append((cursor, nxt))
                cursor = nxt
        if cursor < hi:
            parts[agents[0]].append((cursor, hi))
    return {i: CakePiece.from_intervals(parts[i]) for i in agents}


@dataclass
class EFMOutcome:
    """Everything the pipeline computed, for inspection and auditing."""

    instance: Instance  # normalised
    mixed: MixedAllocation
    certificate: SolveCertificate
    paid: tuple[int, ...]
    subsidies: tuple[Fraction, ...]  # heaviest-path subsidies, aligned with ``paid``
    schedule: Optional[RoundSchedule]


def lift_to_efm(norm: Instance, discrete: DiscreteAllocation):
    """Subsidise the cake-valuers of a normalised instance and cut the cake.

    Returns ``(mixed, paid, subsidies, schedule)``.  When nobody values the
    cake, agent 0 takes all of it and no money is involved.
    """
    paid = cake_valuers(norm)
    if not paid:
        pieces = (WHOLE_CAKE,) + tuple(CakePiece() for _ in range(norm.n - 1))
        mixed = MixedAllocation(discrete, tuple(Fraction(0) for _ in range(norm.n)), pieces)
        return mixed, paid, (), None
    q = heaviest_path_payments(build_envy_graph(norm, discrete, paid))
    pay, sched = payment_schedule(dict(zip(paid, q)))
    cut = consensus_split(norm, pay)
    payments = tuple(pay.get(i, Fraction(0)) for i in range(norm.n))
    pieces = tuple(cut.get(i, CakePiece()) for i in range(norm.n))
    logger.debug("payments %s", payments)
    return MixedAllocation(discrete, payments, pieces), paid, q, sched


def efm_pipeline(inst: Instance, *, budget: int = DEFAULT_BUDGET, heuristic: bool = False,
                 workers: int = 1) -> EFMOutcome:
    """Normalise, solve the items, subsidise cake-valuers, and cut the cake."""
    if not inst.has_cake:
        raise PreconditionError("the EFM pipeline needs an instance with a cake")
    norm = normalize(inst)
    discrete, cert = solve_ef1_envy_freeable(norm, budget=budget, heuristic=heuristic,
                                             workers=workers)
    mixed, paid, q, sched = lift_to_efm(norm, discrete)
    return EFMOutcome(norm, mixed, cert, paid, q, sched)


def solve_efm(inst: Instance, **kwargs) -> MixedAllocation:
    """An EFM allocation of the items and the cake (on the normalised instance)."""
    return efm_pipeline(inst, **kwargs).mixed
