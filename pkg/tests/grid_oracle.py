"""Brute-force lattice oracle for the zone algebra.

Everything here works on explicit point sets over a rational lattice,
independently of the DBM representation under test.  Coordinates are stored
in eighths (integer 8 means one time unit); membership queries run on the
quarter sub-lattice while existential witnesses (delays, freed clocks) sweep
the full eighth lattice.  With integer constraint constants, every witness
interval has width a multiple of 1/4 and lattice endpoints, so an eighth
sweep decides the real-valued existentials exactly.

Constraints are plain tuples ``(clock, rel, value, other)`` with 1-based
clock indices, 0 standing for the constant zero clock; they are evaluated
conjunct by conjunct, never through a Zone.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

SCALE = 8   # lattice steps per time unit
QSTEP = 2   # membership queries use every QSTEP-th point (quarters)


def lattice(n_clocks: int, max_const: int, *, margin: Fraction = Fraction(1, 2)):
    """Membership-query points with coordinates in [0, max_const + margin]."""
    top = max_const * SCALE + int(margin * SCALE)
    axis = range(0, top + 1, QSTEP)
    return [tuple(p) for p in itertools.product(axis, repeat=n_clocks)]


def satisfies(point, constraints) -> bool:
    for clock, rel, value, other in constraints:
        lhs = point[clock - 1] if clock else 0
        rhs = point[other - 1] if other else 0
        d = lhs - rhs
        v = value * SCALE
        if rel == "<" and not d < v:
            return False
        if rel == "<=" and not d <= v:
            return False
        if rel == ">=" and not d >= v:
            return False
        if rel == ">" and not d > v:
            return False
    return True


def set_of(constraints, universe) -> frozenset:
    return frozenset(p for p in universe if satisfies(p, constraints))


def _sweep_top(universe) -> int:
    return max(max(p) for p in universe) if universe else 0


def _witness_horizon(constraints, universe) -> int:
    biggest = max([abs(v) for _, _, v, _ in constraints] + [0])
    return _sweep_top(universe) + (biggest + 2) * SCALE


def up_points(constraints, universe) -> frozenset:
    """{p | exists delay d >= 0 with p - d inside the constraints}."""
    out = set()
    for p in universe:
        for t in range(0, min(p) + 1):
            if satisfies(tuple(c - t for c in p), constraints):
                out.add(p)
                break
    return frozenset(out)


def down_points(constraints, universe) -> frozenset:
    """{p | exists delay d >= 0 with p + d inside the constraints}."""
    horizon = _witness_horizon(constraints, universe)
    out = set()
    for p in universe:
        for t in range(0, horizon + 1):
            if satisfies(tuple(c + t for c in p), constraints):
                out.add(p)
                break
    return frozenset(out)


def _exists_witness(constraints, fixed: dict[int, int], freed: list[int], horizon: int) -> bool:
    axis = range(0, horizon + 1)
    n = max(
        [c for c, _, _, _ in constraints] + [o for _, _, _, o in constraints] + list(fixed) + freed + [1]
    )
    point = [0] * n
    for k, v in fixed.items():
        point[k - 1] = v
    for vals in itertools.product(axis, repeat=len(freed)):
        for k, v in zip(freed, vals):
            point[k - 1] = v
        if satisfies(point, constraints):
            return True
    return False


def free_points(constraints, freed, universe) -> frozenset:
    """{p | some assignment to the freed clocks satisfies the constraints}."""
    freed = sorted(freed)
    if not freed:
        return set_of(constraints, universe)
    horizon = _witness_horizon(constraints, universe)
    out = set()
    cache: dict[tuple, bool] = {}
    for p in universe:
        fixed = {i + 1: v for i, v in enumerate(p) if (i + 1) not in freed}
        key = tuple(sorted(fixed.items()))
        ok = cache.get(key)
        if ok is None:
            ok = _exists_witness(constraints, fixed, freed, horizon)
            cache[key] = ok
        if ok:
            out.add(p)
    return frozenset(out)


def reset_points(constraints, clocks_reset, universe) -> frozenset:
    """{p | p is zero on the reset clocks and some pre-image satisfies cs}."""
    inner = free_points(constraints, clocks_reset, universe)
    return frozenset(
        p for p in inner if all(p[x - 1] == 0 for x in clocks_reset)
    )


def to_fractions(point) -> tuple:
    return tuple(Fraction(c, SCALE) for c in point)


def impl_set(zone, universe) -> frozenset:
    """Grid footprint of an implementation zone (the only bridge to the DBM)."""
    return frozenset(p for p in universe if zone.contains(to_fractions(p)))
