"""Seeded random instances for property suites and the ``gen`` command."""
from __future__ import annotations

import random
from fractions import Fraction
from typing import Optional

from efmix.model import DensitySegment, Instance

GRID = 12  # cake breakpoints are multiples of 1/GRID


def random_cake(rng: random.Random, n: int, max_segments: int = 3,
                allow_zero: bool = True) -> tuple[tuple[DensitySegment, ...], ...]:
    """Piecewise-constant densities; each agent's total is scaled to 1 (or left at 0)."""
    cake = []
    for _ in range(n):
        k = rng.randint(0 if allow_zero else 1, max_segments)
        points = sorted(rng.sample(range(GRID + 1), 2 * k)) if k else []
        segs = []
        for s, e in zip(points[::2], points[1::2]):
            segs.append((Fraction(s, GRID), Fraction(e, GRID), Fraction(rng.randint(1, 3))))
        total = sum((d * (e - s) for s, e, d in segs), Fraction(0))
        cake.append(tuple(DensitySegment(s, e, d / total) for s, e, d in segs) if total else ())
    return tuple(cake)


def random_instance(seed: int, n: int, m: int, *, low: int = -3, high: int = 3,
                    denominator: int = 1, cake: bool = False, max_segments: int = 3,
                    chores_only: bool = False, rng: Optional[random.Random] = None) -> Instance:
    """Utilities drawn uniformly from ``[low, high] / denominator``.

    With ``chores_only`` every utility is drawn from ``[low, -1]`` instead.
    """
    rng = rng or random.Random(seed)
    top = -1 if chores_only else high
    if chores_only and low > -1:
        raise ValueError("chores-only instances need low <= -1")
    rows = tuple(tuple(Fraction(rng.randint(low, top), denominator) for _ in range(m))
                 for _ in range(n))
    segs = random_cake(rng, n, max_segments) if cake else None
    return Instance(tuple(f"a{i}" for i in range(n)), tuple(f"i{t}" for t in range(m)), rows, segs)
