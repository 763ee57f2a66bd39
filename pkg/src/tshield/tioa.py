"""Timed I/O automata, their networks, and concrete plus symbolic semantics.

Automata are immutable after construction.  Guards and invariants are
conjunctions of single-clock constraints with integer bounds (the model file
format); clock-difference constraints are accepted internally where the
algorithms need them.  Bounded integer variables ride along with the discrete
state: guards may test them and edges may assign them, which is how the
``error`` flag of the shield construction is wired.

Composition is broadcast: an output owned by one component synchronises the
matching input edges of every other component; a receiver without an enabled
edge simply stays put (the implicit input-enabledness convention).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import zones as zn
from .errors import (
    EmptyResult,
    InvariantViolation,
    NondeterministicSpec,
    NotEnabled,
    TargetInvariantViolated,
    ValidationError,
)

__all__ = [
    "Action",
    "Edge",
    "Tioa",
    "Network",
    "ConcreteState",
    "SymState",
    "complete_inputs",
    "check_refinement",
]


@dataclass(frozen=True)
class Action:
    name: str
    kind: str  # "input" | "output"

    def __post_init__(self):
        if self.kind not in ("input", "output"):
            raise ValidationError(f"bad action kind {self.kind!r}")


@dataclass(frozen=True)
class Edge:
    src: str
    guard: tuple[zn.Constraint, ...]
    action: str
    resets: tuple[int, ...]
    dst: str
    int_guard: tuple[tuple[str, str, int], ...] = ()
    int_update: tuple[tuple[str, int], ...] = ()
    # internal extras used by shield construction; absent from model files
    swaps: tuple[tuple[int, int], ...] = ()  # dst_clock <- src_clock pairs
    link: str = ""   # mirror edges fire together with observing this label
    tag: str = ""    # e.g. "mirror" / "post_fault" / "last_chance" / "fault"


def _int_guard_holds(guard, ints: Mapping[str, int]) -> bool:
    for var, op, value in guard:
        v = ints[var]
        if op == "==" and not v == value:
            return False
        if op == "!=" and not v != value:
            return False
        if op == "<" and not v < value:
            return False
        if op == "<=" and not v <= value:
            return False
        if op == ">" and not v > value:
            return False
        if op == ">=" and not v >= value:
            return False
    return True


@dataclass(frozen=True)
class Tioa:
    """One automaton: named locations with upper-bound invariants, clocks by
    1-based local index, guarded edges, and declared bounded integers."""

    name: str
    clocks: tuple[str, ...]
    locations: tuple[str, ...]
    invariants: Mapping[str, tuple[zn.Constraint, ...]]
    initial: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    edges: tuple[Edge, ...]
    int_vars: Mapping[str, tuple[int, int, int]] = field(default_factory=dict)  # lo, hi, init

    def __post_init__(self):
        locs = set(self.locations)
        if self.initial not in locs:
            raise ValidationError(f"{self.name}: initial location {self.initial!r} undeclared")
        for loc, inv in self.invariants.items():
            if loc not in locs:
                raise ValidationError(f"{self.name}: invariant on unknown location {loc!r}")
            for c in inv:
                if c.rel not in ("<", "<="):
                    raise ValidationError(
                        f"{self.name}: invariant at {loc!r} must be upper bounds only"
                    )
        alphabet = set(self.inputs) | set(self.outputs)
        if set(self.inputs) & set(self.outputs):
            raise ValidationError(f"{self.name}: inputs and outputs overlap")
        for e in self.edges:
            if e.src not in locs or e.dst not in locs:
                raise ValidationError(f"{self.name}: edge {e.src}->{e.dst} uses unknown location")
            if e.action not in alphabet:
                raise ValidationError(f"{self.name}: edge action {e.action!r} undeclared")
            for c in e.guard:
                if c.clock > len(self.clocks) or c.other > len(self.clocks):
                    raise ValidationError(f"{self.name}: guard clock out of range")
            for x in e.resets:
                if not (1 <= x <= len(self.clocks)):
                    raise ValidationError(f"{self.name}: reset clock {x} out of range")

    # -- structure helpers ----------------------------------------------

    def invariant_of(self, loc: str) -> tuple[zn.Constraint, ...]:
        return tuple(self.invariants.get(loc, ()))

    def edges_from(self, loc: str, action: str | None = None) -> list[Edge]:
        return [
            e for e in self.edges
            if e.src == loc and (action is None or e.action == action)
        ]

    def action_kind(self, name: str) -> str:
        if name in self.outputs:
            return "output"
        if name in self.inputs:
            return "input"
        raise KeyError(name)

    def max_constant(self) -> int:
        best = 0
        for e in self.edges:
            for c in e.guard:
                best = max(best, abs(c.value))
        for inv in self.invariants.values():
            for c in inv:
                best = max(best, abs(c.value))
        return best

    def guard_zone(self, guard: Iterable[zn.Constraint]) -> zn.Zone:
        return zn.from_constraints(len(self.clocks), guard)

    def check_deterministic(self) -> None:
        """Syntactic check: same (src, action) edges have exclusive guards."""
        by_key: dict[tuple[str, str], list[Edge]] = {}
        for e in self.edges:
            by_key.setdefault((e.src, e.action), []).append(e)
        for (src, action), group in by_key.items():
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    a, b = group[i], group[j]
                    if not self._ints_compatible(a.int_guard, b.int_guard):
                        continue
                    za = self.guard_zone(a.guard + self.invariant_of(src))
                    zb = self.guard_zone(b.guard + self.invariant_of(src))
                    if not zn.intersect(za, zb).is_empty():
                        raise NondeterministicSpec(
                            f"{self.name}: overlapping {action!r} edges from {src!r}"
                        )

    def _ints_compatible(self, g1, g2) -> bool:
        if not g1 and not g2:
            return True
        names = sorted({v for v, _, _ in g1} | {v for v, _, _ in g2})
        ranges = []
        for v in names:
            lo, hi, _ = self.int_vars.get(v, (0, 1, 0))
            ranges.append(range(lo, hi + 1))
        import itertools

        for combo in itertools.product(*ranges):
            ints = dict(zip(names, combo))
            if _int_guard_holds(g1, ints) and _int_guard_holds(g2, ints):
                return True
        return False


def complete_inputs(a: Tioa) -> Tioa:
    """Add guarded ignore self-loops so every input is receivable everywhere.

    The completion covers, per location and input, the part of the valuation
    space left open by the declared edges.  Existing behaviour is untouched;
    running the completion twice is the identity.
    """
    extra: list[Edge] = []
    universe = zn.zone_universe(len(a.clocks))
    for loc in a.locations:
        for inp in sorted(a.inputs):
            existing = a.edges_from(loc, inp)
            if any(e.int_guard for e in existing):
                raise ValidationError(
                    f"{a.name}: cannot complete input {inp!r} with integer-guarded edges"
                )
            gap = [universe]
            for e in existing:
                gap = zn.fed_subtract(gap, [a.guard_zone(e.guard)])
            for piece in gap:
                extra.append(
                    Edge(loc, _zone_to_guard(piece), inp, (), loc)
                )
    if not extra:
        return a
    return replace(a, edges=a.edges + tuple(extra))


def _zone_to_guard(z: zn.Zone) -> tuple[zn.Constraint, ...]:
    """Read a canonical zone back as a minimal constraint conjunction.

    Implied conjuncts are dropped, diagonals first, so box-shaped zones come
    back diagonal-free.
    """
    if z.is_empty():
        raise ValueError("empty zone has no guard form")
    cons: list[zn.Constraint] = []
    for i in range(z.n + 1):
        for j in range(z.n + 1):
            if i == j:
                continue
            b = z.m[i][j]
            if b >= zn.INF:
                continue
            v, strict = zn.bound_value(b), zn.bound_is_strict(b)
            if i == 0:
                if v == 0 and not strict:
                    continue  # x >= 0 is implicit
                cons.append(zn.Constraint(j, ">" if strict else ">=", -v))
            elif j == 0:
                cons.append(zn.Constraint(i, "<" if strict else "<=", v))
            else:
                cons.append(zn.Constraint(i, "<" if strict else "<=", v, j))
    cons.sort(key=lambda c: (c.other == 0, c.clock, c.other, c.rel, c.value))
    kept = list(cons)
    for c in list(cons):
        trial = [k for k in kept if k is not c]
        if zn.from_constraints(z.n, trial) == z:
            kept = trial
    return tuple(kept)


# ----------------------------------------------------------------- network


@dataclass(frozen=True)
class Network:
    """Parallel composition with pairwise-disjoint output alphabets."""

    components: tuple[Tioa, ...]

    def __post_init__(self):
        seen: dict[str, str] = {}
        for c in self.components:
            for o in c.outputs:
                if o in seen:
                    raise ValidationError(
                        f"output {o!r} owned by both {seen[o]} and {c.name}"
                    )
                seen[o] = c.name

    # clock indexing: the global space is the concatenation of component clocks
    def clock_offset(self, idx: int) -> int:
        return sum(len(c.clocks) for c in self.components[:idx])

    @property
    def n_clocks(self) -> int:
        return sum(len(c.clocks) for c in self.components)

    def clock_names(self) -> list[str]:
        out = []
        for c in self.components:
            out.extend(f"{c.name}.{x}" for x in c.clocks)
        return out

    def shift(self, idx: int, c: zn.Constraint) -> zn.Constraint:
        off = self.clock_offset(idx)
        return zn.Constraint(
            c.clock + off if c.clock else 0,
            c.rel,
            c.value,
            c.other + off if c.other else 0,
        )

    def shifted_guard(self, idx: int, guard: Iterable[zn.Constraint]) -> tuple[zn.Constraint, ...]:
        return tuple(self.shift(idx, c) for c in guard)

    def invariant_constraints(self, locs: Sequence[str]) -> tuple[zn.Constraint, ...]:
        out = []
        for i, c in enumerate(self.components):
            out.extend(self.shifted_guard(i, c.invariant_of(locs[i])))
        return tuple(out)

    def initial_locs(self) -> tuple[str, ...]:
        return tuple(c.initial for c in self.components)

    def initial_ints(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.components:
            for var, (_lo, _hi, init) in c.int_vars.items():
                out.setdefault(var, init)
        return out

    def owner_of(self, action: str) -> int | None:
        for i, c in enumerate(self.components):
            if action in c.outputs:
                return i
        return None

    def alphabet(self) -> list[str]:
        names = set()
        for c in self.components:
            names.update(c.inputs)
            names.update(c.outputs)
        return sorted(names)

    def initial_state(self) -> "ConcreteState":
        vals = tuple(Fraction(0) for _ in range(self.n_clocks))
        return ConcreteState(self.initial_locs(), vals, dict(self.initial_ints()))

    def max_constants(self) -> list[int]:
        """Per global clock: the largest constant mentioned anywhere."""
        upto = [0] * self.n_clocks
        for i, c in enumerate(self.components):
            off = self.clock_offset(i)
            sources = [e.guard for e in c.edges] + [
                c.invariant_of(loc) for loc in c.locations
            ]
            for guard in sources:
                for con in guard:
                    v = abs(con.value)
                    if con.clock:
                        upto[off + con.clock - 1] = max(upto[off + con.clock - 1], v)
                    if con.other:
                        upto[off + con.other - 1] = max(upto[off + con.other - 1], v)
        return upto


@dataclass(frozen=True)
class ConcreteState:
    locs: tuple[str, ...]
    vals: tuple[Fraction, ...]
    ints: Mapping[str, int]

    def value_of(self, net: Network, comp: int, clock: int) -> Fraction:
        return self.vals[net.clock_offset(comp) + clock - 1]


def _max_admissible_delay(net: Network, s: ConcreteState) -> tuple[Fraction | None, bool]:
    """(sup delay, attainable) under all component invariants; None = unbounded."""
    best: Fraction | None = None
    attainable = True
    for i, c in enumerate(net.components):
        off = net.clock_offset(i)
        for con in c.invariant_of(s.locs[i]):
            v = s.vals[off + con.clock - 1]
            slack = Fraction(con.value) - v
            if best is None or slack < best or (slack == best and con.rel == "<"):
                best = slack
                attainable = con.rel == "<="
    return best, attainable


def delay(net: Network, s: ConcreteState, d: Fraction) -> ConcreteState:
    """Advance all clocks uniformly; raises when an invariant caps the delay."""
    d = Fraction(d)
    if d < 0:
        raise ValueError("negative delay")
    sup, attainable = _max_admissible_delay(net, s)
    if sup is not None and (d > sup or (d == sup and not attainable)):
        raise InvariantViolation(sup)
    return ConcreteState(s.locs, tuple(v + d for v in s.vals), dict(s.ints))


def _enabled_edge(net: Network, s: ConcreteState, comp: int, action: str) -> Edge | None:
    c = net.components[comp]
    hits = []
    for e in c.edges_from(s.locs[comp], action):
        if not _int_guard_holds(e.int_guard, s.ints):
            continue
        off = net.clock_offset(comp)
        ok = True
        for con in e.guard:
            vi = s.vals[off + con.clock - 1] if con.clock else Fraction(0)
            vo = s.vals[off + con.other - 1] if con.other else Fraction(0)
            dd, vv = vi - vo, Fraction(con.value)
            if con.rel == "<" and not dd < vv:
                ok = False
            elif con.rel == "<=" and not dd <= vv:
                ok = False
            elif con.rel == ">=" and not dd >= vv:
                ok = False
            elif con.rel == ">" and not dd > vv:
                ok = False
            if not ok:
                break
        if ok:
            hits.append(e)
    if len(hits) > 1:
        raise NondeterministicSpec(
            f"{c.name}: several {action!r} edges enabled at {s.locs[comp]}"
        )
    return hits[0] if hits else None


def _apply_edge(net: Network, s: ConcreteState, comp: int, e: Edge,
                locs: list[str], vals: list[Fraction], ints: dict[str, int]) -> None:
    off = net.clock_offset(comp)
    if e.swaps:
        snapshot = list(vals)
        for dst_c, src_c in e.swaps:
            vals[off + dst_c - 1] = snapshot[off + src_c - 1]
    for x in e.resets:
        vals[off + x - 1] = Fraction(0)
    for var, value in e.int_update:
        ints[var] = value
    locs[comp] = e.dst


def fire(net: Network, s: ConcreteState, action: str) -> ConcreteState:
    """One discrete step: the owner sends, every listener with an enabled edge
    follows, listeners without one ignore the event."""
    owner = net.owner_of(action)
    locs, vals, ints = list(s.locs), list(s.vals), dict(s.ints)
    moved = False
    for i, c in enumerate(net.components):
        if action not in c.outputs and action not in c.inputs:
            continue
        if i == owner or action in c.inputs:
            e = _enabled_edge(net, s, i, action)
            if e is None:
                if i == owner:
                    raise NotEnabled(f"{c.name} cannot send {action!r} now")
                continue
            _apply_edge(net, s, i, e, locs, vals, ints)
            moved = True
    if not moved:
        raise NotEnabled(f"no component reacts to {action!r}")
    out = ConcreteState(tuple(locs), tuple(vals), ints)
    for i, c in enumerate(net.components):
        off = net.clock_offset(i)
        for con in c.invariant_of(out.locs[i]):
            v = out.vals[off + con.clock - 1]
            if con.rel == "<=" and v > con.value:
                raise TargetInvariantViolated(f"{c.name} at {out.locs[i]}")
            if con.rel == "<" and v >= con.value:
                raise TargetInvariantViolated(f"{c.name} at {out.locs[i]}")
    return out


def run_trace(net: Network, steps: Iterable[tuple[Fraction, str]]) -> ConcreteState:
    s = net.initial_state()
    for d, action in steps:
        s = delay(net, s, Fraction(d))
        s = fire(net, s, action)
    return s


# ------------------------------------------------------------- symbolic


@dataclass(frozen=True)
class SymState:
    locs: tuple[str, ...]
    ints: tuple[tuple[str, int], ...]
    fed: tuple[zn.Zone, ...]

    @staticmethod
    def initial(net: Network) -> "SymState":
        z = zn.zone_zero(net.n_clocks)
        z = zn.intersect(z, net.invariant_constraints(net.initial_locs()))
        if z.is_empty():
            raise EmptyResult("initial state violates invariants")
        return SymState(
            net.initial_locs(),
            tuple(sorted(net.initial_ints().items())),
            (z,),
        )

    def ints_dict(self) -> dict[str, int]:
        return dict(self.ints)


def sym_delay(net: Network, s: SymState) -> SymState:
    inv = net.invariant_constraints(s.locs)
    fed = [zn.intersect(zn.up(z), inv) for z in s.fed]
    fed = [z for z in fed if not z.is_empty()]
    if not fed:
        raise EmptyResult("delay closure is empty")
    return SymState(s.locs, s.ints, tuple(zn.fed_reduce(fed)))


def sym_succ(net: Network, s: SymState, action: str,
             k: Sequence[int] | None = None) -> SymState:
    """Symbolic discrete successor (guard, reset, target invariant, then
    extrapolation when ceilings are given)."""
    owner = net.owner_of(action)
    locs, ints = list(s.locs), s.ints_dict()
    fed = [z for z in s.fed]
    for i, c in enumerate(net.components):
        if action not in c.outputs and action not in c.inputs:
            continue
        if not (i == owner or action in c.inputs):
            continue
        candidates = [
            e for e in c.edges_from(s.locs[i], action)
            if _int_guard_holds(e.int_guard, ints)
        ]
        if not candidates:
            if i == owner:
                raise EmptyResult(f"{c.name} has no {action!r} edge here")
            continue
        if len(candidates) > 1:
            raise NondeterministicSpec(f"{c.name}: ambiguous symbolic step")
        e = candidates[0]
        off = net.clock_offset(i)
        guard = net.shifted_guard(i, e.guard)
        fed = [zn.intersect(z, guard) for z in fed]
        if e.swaps:
            perm = {off + d: off + src for d, src in e.swaps}
            fed = [zn.swap_clocks(z, perm) for z in fed]
        fed = [zn.reset(z, [off + x for x in e.resets]) for z in fed]
        for var, value in e.int_update:
            ints[var] = value
        locs[i] = e.dst
    inv = net.invariant_constraints(locs)
    fed = [zn.intersect(z, inv) for z in fed]
    fed = [z for z in fed if not z.is_empty()]
    if not fed:
        raise EmptyResult(f"no symbolic successor via {action!r}")
    if k is not None:
        fed = [zn.extrapolate(z, k) for z in fed]
    return SymState(tuple(locs), tuple(sorted(ints.items())), tuple(zn.fed_reduce(fed)))


def check_refinement(impl: Tioa, spec: Tioa):
    """Does every behaviour of ``impl`` stay within ``spec``?

    Composes the implementation with an observation monitor for the spec and
    searches the joint zone graph for the monitor's error location.  Returns
    ``(True, None)`` or ``(False, witness)`` where the witness is a concrete
    alternating (delay, action) trace of the implementation that the spec
    cannot follow.
    """
    from .game import refinement_search  # local import to avoid a cycle

    spec.check_deterministic()
    return refinement_search(impl, spec)
