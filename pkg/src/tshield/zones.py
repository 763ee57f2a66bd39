"""Clock-constraint and zone algebra on difference-bound matrices.

A zone over clocks x1..xn is stored as an (n+1) x (n+1) matrix whose entry
(i, j) bounds the difference xi - xj (index 0 is the constant-zero clock).
Bounds are encoded in single integers, ``(value << 1) | weak_bit``, so that
tighter-of and sum are plain integer operations and no floats ever appear.
Zones are immutable tuples; every operation returns a fresh canonical zone.

Federations are plain lists of non-empty canonical zones whose semantics is
the union of their members.  Overlap between members is permitted; exact
minimisation is not attempted (subsumption dropping is enough at the scales
this library targets).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "INF",
    "Constraint",
    "Zone",
    "zone_zero",
    "zone_universe",
    "up",
    "down",
    "down_strict",
    "right_open",
    "intersect",
    "reset",
    "free",
    "copy_clock",
    "swap_clocks",
    "subtract",
    "extrapolate",
    "fed_union",
    "fed_intersect",
    "fed_subtract",
    "fed_reduce",
    "fed_contains",
    "fed_is_subset",
    "fed_down",
    "fed_up",
    "fed_equal",
    "is_subset",
]

# Encoded bound: (value << 1) | 1 for "<= value", (value << 1) for "< value".
# INF is a sentinel strictly larger than any finite encoding in use.
INF = 1 << 62
_ZERO_WEAK = 1  # encodes  <= 0


def bound(value: int, strict: bool) -> int:
    return (value << 1) | (0 if strict else 1)


def bound_value(b: int) -> int:
    return b >> 1

def bound_is_strict(b: int) -> bool:
    return not (b & 1)


def bound_add(a: int, b: int) -> int:
    if a >= INF or b >= INF:
        return INF
    return a + b - ((a & 1) | (b & 1))


def bound_neg(b: int) -> int:
    """Negation of a constraint: not(x - y <= c) is y - x < -c."""
    if b >= INF:
        raise ValueError("cannot negate an infinite bound")
    return ((-(b >> 1)) << 1) | (0 if (b & 1) else 1)


@dataclass(frozen=True)
class Constraint:
    """One conjunct ``clock - other rel bound`` with integer bound.

    ``other`` is 0 for ordinary single-clock constraints; a nonzero value
    makes this a clock-difference (diagonal) constraint, which the model
    format rejects but internal computations rely on.
    """

    clock: int
    rel: str  # one of "<", "<=", ">=", ">"
    value: int
    other: int = 0

    def __post_init__(self):
        if self.rel not in ("<", "<=", ">=", ">"):
            raise ValueError(f"bad relation {self.rel!r}")
        if self.clock == self.other:
            raise ValueError("constraint needs two distinct clocks")

    def dbm_entry(self) -> tuple[int, int, int]:
        """Return (i, j, encoded bound) meaning xi - xj <= / < value."""
        if self.rel in ("<", "<="):
            return self.clock, self.other, bound(self.value, self.rel == "<")
        # x - y >= c  is  y - x <= -c
        return self.other, self.clock, bound(-self.value, self.rel == ">")


def _fresh(n: int, fill: int = INF) -> list[list[int]]:
    m = [[fill] * (n + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        m[i][i] = _ZERO_WEAK
        m[0][i] = _ZERO_WEAK  # all clocks nonnegative
    m[0][0] = _ZERO_WEAK
    return m


class Zone:
    """Canonical DBM over ``n`` clocks; empty zones are a distinct singleton-ish
    value with ``is_empty()`` true."""

    __slots__ = ("n", "m", "_empty")

    def __init__(self, n: int, rows: Sequence[Sequence[int]], *, _canonical: bool = False):
        self.n = n
        if _canonical:
            self.m = tuple(tuple(r) for r in rows)
            self._empty = False
            return
        mat = [list(r) for r in rows]
        self._empty = not _close(mat, n)
        self.m = tuple(tuple(r) for r in mat)

    # -- basics ---------------------------------------------------------

    def is_empty(self) -> bool:
        return self._empty

    def __eq__(self, other) -> bool:
        if not isinstance(other, Zone):
            return NotImplemented
        if self._empty or other._empty:
            return self._empty and other._empty
        return self.n == other.n and self.m == other.m

    def __hash__(self):
        return hash((self.n, self._empty, self.m if not self._empty else None))

    def contains(self, valuation: Sequence) -> bool:
        """Membership test for a concrete valuation (rationals accepted)."""
        if self._empty:
            return False
        vals = (Fraction(0),) + tuple(Fraction(v) for v in valuation)
        m = self.m
        for i in range(self.n + 1):
            for j in range(self.n + 1):
                b = m[i][j]
                if b >= INF:
                    continue
                d = vals[i] - vals[j]
                v = bound_value(b)
                if d > v or (d == v and bound_is_strict(b)):
                    return False
        return True

    def sample(self) -> tuple[Fraction, ...]:
        """Some valuation inside the zone (midpoints of successive intervals)."""
        if self._empty:
            raise ValueError("empty zone has no members")
        vals: list[Fraction] = [Fraction(0)] * (self.n + 1)
        for i in range(1, self.n + 1):
            lo, lo_strict = Fraction(0), False
            hi, hi_strict = None, False
            for j in range(0, i):
                b = self.m[i][j]  # xi - xj <= c  ->  xi <= c + vj
                if b < INF:
                    c = Fraction(bound_value(b)) + vals[j]
                    if hi is None or c < hi or (c == hi and bound_is_strict(b)):
                        hi, hi_strict = c, bound_is_strict(b)
                b = self.m[j][i]  # xj - xi <= c  ->  xi >= vj - c
                if b < INF:
                    c = vals[j] - Fraction(bound_value(b))
                    if c > lo or (c == lo and bound_is_strict(b)):
                        lo, lo_strict = c, bound_is_strict(b)
            if hi is None:
                vals[i] = lo + 1 if lo_strict else lo
            elif lo == hi:
                vals[i] = lo
            else:
                vals[i] = (lo + hi) / 2
        return tuple(vals[1:])

    def __repr__(self):
        if self._empty:
            return "Zone(empty)"
        return f"Zone({self.pretty()})"

    def pretty(self, names: Sequence[str] | None = None) -> str:
        """Conjunction string like ``x-y<=2 & y<3`` for debugging."""
        if self._empty:
            return "false"
        if names is None:
            names = [f"x{i}" for i in range(1, self.n + 1)]
        names = ["0"] + list(names)
        parts = []
        for i in range(self.n + 1):
            for j in range(self.n + 1):
                if i == j:
                    continue
                b = self.m[i][j]
                if b >= INF:
                    continue
                v, strict = bound_value(b), bound_is_strict(b)
                if j == 0:
                    lhs = names[i]
                elif i == 0:
                    # 0 - xj <= c  ->  xj >= -c
                    parts.append(f"{names[j]}{'>' if strict else '>='}{-v}")
                    continue
                else:
                    lhs = f"{names[i]}-{names[j]}"
                parts.append(f"{lhs}{'<' if strict else '<='}{v}")
        return " & ".join(parts) if parts else "true"

    def rows(self) -> list[list[int]]:
        return [list(r) for r in self.m]


_EMPTY_CACHE: dict[int, Zone] = {}


def _empty_zone(n: int) -> Zone:
    z = _EMPTY_CACHE.get(n)
    if z is None:
        z = Zone.__new__(Zone)
        z.n = n
        z.m = ()
        z._empty = True
        _EMPTY_CACHE[n] = z
    return z


def _close(m: list[list[int]], n: int) -> bool:
    """Floyd-Warshall tightening; returns False when inconsistent."""
    size = n + 1
    for i in range(size):
        if m[i][i] < _ZERO_WEAK:
            return False
        m[i][i] = _ZERO_WEAK
    for k in range(size):
        mk = m[k]
        for i in range(size):
            mik = m[i][k]
            if mik >= INF:
                continue
            mi = m[i]
            for j in range(size):
                b = bound_add(mik, mk[j])
                if b < mi[j]:
                    mi[j] = b
        for i in range(size):
            if m[i][i] < _ZERO_WEAK:
                return False
    return True


def _canonical(mat: list[list[int]], n: int) -> Zone:
    if not _close(mat, n):
        return _empty_zone(n)
    z = Zone.__new__(Zone)
    z.n = n
    z.m = tuple(tuple(r) for r in mat)
    z._empty = False
    return z


# -- constructors ------------------------------------------------------


def zone_zero(n_clocks: int) -> Zone:
    """Zone containing exactly the all-zero valuation."""
    m = _fresh(n_clocks)
    for i in range(n_clocks + 1):
        for j in range(n_clocks + 1):
            m[i][j] = _ZERO_WEAK
    return _canonical(m, n_clocks)


def zone_universe(n_clocks: int) -> Zone:
    """All nonnegative valuations."""
    return _canonical(_fresh(n_clocks), n_clocks)


def zone_point(values: Sequence[int]) -> Zone:
    """Zone containing exactly one integer valuation."""
    n = len(values)
    m = _fresh(n)
    vals = [0] + [int(v) for v in values]
    for i in range(n + 1):
        for j in range(n + 1):
            m[i][j] = bound(vals[i] - vals[j], False)
    return _canonical(m, n)


def from_constraints(n_clocks: int, constraints: Iterable[Constraint]) -> Zone:
    return intersect(zone_universe(n_clocks), constraints)


# -- core operations ---------------------------------------------------


def up(z: Zone) -> Zone:
    """Delay closure: every member plus an arbitrary nonnegative delay."""
    if z.is_empty():
        return z
    m = z.rows()
    for i in range(1, z.n + 1):
        m[i][0] = INF
    # removing upper bounds of a canonical DBM keeps it canonical
    return _canonical(m, z.n)


def down(z: Zone) -> Zone:
    """Delay past: valuations from which some nonnegative delay enters z."""
    if z.is_empty():
        return z
    m = z.rows()
    for j in range(1, z.n + 1):
        m[0][j] = _ZERO_WEAK
    return _canonical(m, z.n)


def down_strict(z: Zone) -> Zone:
    """Valuations from which some strictly positive delay enters z."""
    if z.is_empty():
        return z
    m = z.rows()
    for i in range(1, z.n + 1):
        if m[i][0] < INF:
            m[i][0] = m[i][0] & ~1  # make the upper bound strict
    for j in range(1, z.n + 1):
        m[0][j] = _ZERO_WEAK
    return _canonical(m, z.n)


def right_open(z: Zone) -> Zone:
    """Valuations whose immediate future enters z: points s with
    (s, s+eps] inside z for every small enough eps > 0.

    Weakens strict lower bounds to weak ones and sharpens upper bounds to
    strict; clock differences are untouched (delay preserves them).
    """
    if z.is_empty():
        return z
    m = z.rows()
    for i in range(1, z.n + 1):
        if m[i][0] < INF:
            m[i][0] = m[i][0] & ~1
        m[0][i] = m[0][i] | 1
    return _canonical(m, z.n)


def intersect(z: Zone, constraints: Iterable[Constraint] | Zone) -> Zone:
    """Canonical intersection with a constraint set or another zone."""
    if isinstance(constraints, Zone):
        other = constraints
        if z.is_empty() or other.is_empty():
            return _empty_zone(z.n)
        if z.n != other.n:
            raise ValueError("zone dimensions differ")
        m = z.rows()
        changed = False
        for i in range(z.n + 1):
            for j in range(z.n + 1):
                if other.m[i][j] < m[i][j]:
                    m[i][j] = other.m[i][j]
                    changed = True
        if not changed:
            return z
        return _canonical(m, z.n)
    if z.is_empty():
        return z
    m = z.rows()
    changed = False
    for c in constraints:
        i, j, b = c.dbm_entry()
        if i > z.n or j > z.n:
            raise ValueError(f"constraint on clock {max(i, j)} outside zone of {z.n}")
        if b < m[i][j]:
            m[i][j] = b
            changed = True
    if not changed:
        return z
    return _canonical(m, z.n)


def reset(z: Zone, clocks: Iterable[int]) -> Zone:
    """Image of z under resetting the given clocks to zero."""
    if z.is_empty():
        return z
    m = z.rows()
    for x in clocks:
        if not (1 <= x <= z.n):
            raise ValueError(f"clock {x} out of range")
        for j in range(z.n + 1):
            m[x][j] = m[0][j]
            m[j][x] = m[j][0]
        m[x][x] = _ZERO_WEAK
        m[x][0] = _ZERO_WEAK
        m[0][x] = _ZERO_WEAK
    return _canonical(m, z.n)


def free(z: Zone, clocks: Iterable[int]) -> Zone:
    """Drop every bound mentioning the given clocks (reset preimage helper)."""
    if z.is_empty():
        return z
    m = z.rows()
    for x in clocks:
        if not (1 <= x <= z.n):
            raise ValueError(f"clock {x} out of range")
        for j in range(z.n + 1):
            m[x][j] = INF
            m[j][x] = INF
        m[x][x] = _ZERO_WEAK
        m[0][x] = _ZERO_WEAK
    return _canonical(m, z.n)


def copy_clock(z: Zone, dst: int, src: int) -> Zone:
    """Image of z under ``dst := src``."""
    if z.is_empty() or dst == src:
        return z
    m = z.rows()
    for j in range(z.n + 1):
        m[dst][j] = m[src][j]
        m[j][dst] = m[j][src]
    m[dst][dst] = _ZERO_WEAK
    m[dst][src] = _ZERO_WEAK
    m[src][dst] = _ZERO_WEAK
    return _canonical(m, z.n)


def swap_clocks(z: Zone, perm: dict[int, int]) -> Zone:
    """Image of z under a clock permutation ``new value of k = old value of perm[k]``."""
    if z.is_empty():
        return z
    full = list(range(z.n + 1))
    for k, v in perm.items():
        full[k] = v
    m = [[z.m[full[i]][full[j]] for j in range(z.n + 1)] for i in range(z.n + 1)]
    return _canonical(m, z.n)


def _split_entries(z: Zone) -> list[tuple[int, int, int]]:
    """A small set of entries whose conjunction still defines z: canonical
    entries that no alternative two-step path re-derives.  Falls back to all
    finite entries when zero-cycles make the greedy reduction lossy."""
    n = z.n
    out = []
    for i in range(n + 1):
        for j in range(n + 1):
            if i == j:
                continue
            b = z.m[i][j]
            if b >= INF:
                continue
            if i == 0 and b == _ZERO_WEAK:
                continue  # implicit nonnegativity
            derivable = False
            for k in range(n + 1):
                if k == i or k == j:
                    continue
                if bound_add(z.m[i][k], z.m[k][j]) <= b:
                    derivable = True
                    break
            if not derivable:
                out.append((i, j, b))
    m = _fresh(n)
    for i, j, b in out:
        if b < m[i][j]:
            m[i][j] = b
    if _canonical(m, n) != z:
        out = [
            (i, j, z.m[i][j])
            for i in range(n + 1)
            for j in range(n + 1)
            if i != j and z.m[i][j] < INF and not (i == 0 and z.m[i][j] == _ZERO_WEAK)
        ]
    return out


def subtract(a: Zone, b: Zone) -> list[Zone]:
    """Federation with semantics ``a minus b``; members non-empty canonical.

    Splits a along a defining constraint set of b; the pieces may overlap.
    """
    if a.is_empty():
        return []
    if b.is_empty():
        return [a]
    if a.n != b.n:
        raise ValueError("zone dimensions differ")
    out: list[Zone] = []
    for i, j, bb in _split_entries(b):
        if a.m[i][j] <= bb:
            continue  # canonical a already satisfies this conjunct
        neg = bound_neg(bb)  # xj - xi < / <= -value
        if a.m[j][i] <= neg:
            return [a]  # all of a violates this conjunct: disjoint from b
        m = a.rows()
        m[j][i] = neg
        piece = _canonical(m, a.n)
        if not piece.is_empty():
            out.append(piece)
    return out


def is_subset(a: Zone, b: Zone) -> bool:
    """Inclusion of canonical zones."""
    if a.is_empty():
        return True
    if b.is_empty():
        return False
    if a.n != b.n:
        raise ValueError("zone dimensions differ")
    for i in range(a.n + 1):
        for j in range(a.n + 1):
            if a.m[i][j] > b.m[i][j]:
                return False
    return True


def extrapolate(z: Zone, k: Sequence[int]) -> Zone:
    """Classical max-constant normalisation with per-clock ceilings ``k``.

    ``k[i]`` is the ceiling for clock i+1.  Bounds above the ceiling are
    widened to infinity and lower bounds below ``-k`` are relaxed; the result
    contains z and agrees with it on valuations below the ceilings.
    """
    if z.is_empty():
        return z
    if len(k) != z.n:
        raise ValueError("need one ceiling per clock")
    ks = [0] + [int(v) for v in k]
    m = z.rows()
    changed = False
    for i in range(z.n + 1):
        for j in range(z.n + 1):
            if i == j:
                continue
            b = m[i][j]
            if b >= INF:
                continue
            if i != 0 and bound_value(b) > ks[i]:
                m[i][j] = INF
                changed = True
            elif j != 0 and bound_value(b) < -ks[j]:
                m[i][j] = bound(-ks[j], True)
                changed = True
    if not changed:
        return z
    return _canonical(m, z.n)


# -- federations -------------------------------------------------------


def fed_reduce(fed: Iterable[Zone]) -> list[Zone]:
    """Drop empty members and members contained in a single other member."""
    zs = [z for z in fed if not z.is_empty()]
    out: list[Zone] = []
    for i, z in enumerate(zs):
        subsumed = False
        for j, w in enumerate(zs):
            if i == j:
                continue
            if is_subset(z, w) and not (is_subset(w, z) and j > i):
                subsumed = True
                break
        if not subsumed:
            out.append(z)
    return out


def fed_union(a: Iterable[Zone], b: Iterable[Zone]) -> list[Zone]:
    return fed_reduce(list(a) + list(b))


def fed_intersect(a: Iterable[Zone], b: Iterable[Zone]) -> list[Zone]:
    out = []
    for za in a:
        for zb in b:
            z = intersect(za, zb)
            if not z.is_empty():
                out.append(z)
    return fed_reduce(out)


def fed_subtract(a: Iterable[Zone], b: Iterable[Zone]) -> list[Zone]:
    """Semantics ``union(a) minus union(b)``."""
    pieces = [z for z in a if not z.is_empty()]
    for zb in b:
        if zb.is_empty():
            continue
        nxt: list[Zone] = []
        for za in pieces:
            nxt.extend(subtract(za, zb))
        pieces = fed_reduce(nxt) if len(nxt) > 8 else nxt
        if not pieces:
            break
    return fed_reduce(pieces)


def fed_contains(fed: Iterable[Zone], valuation: Sequence) -> bool:
    return any(z.contains(valuation) for z in fed)


def fed_is_subset(a: Iterable[Zone], b: Iterable[Zone]) -> bool:
    """Union(a) included in union(b), exact via subtraction."""
    blist = list(b)
    for za in a:
        if za.is_empty():
            continue
        if any(is_subset(za, zb) for zb in blist):
            continue
        if fed_subtract([za], blist):
            return False
    return True


def fed_equal(a: Iterable[Zone], b: Iterable[Zone]) -> bool:
    alist, blist = list(a), list(b)
    return fed_is_subset(alist, blist) and fed_is_subset(blist, alist)


def fed_down(fed: Iterable[Zone]) -> list[Zone]:
    return fed_reduce([down(z) for z in fed])


def fed_up(fed: Iterable[Zone]) -> list[Zone]:
    return fed_reduce([up(z) for z in fed])
