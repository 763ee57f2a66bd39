"""Timed-game solving over clock zones.

The engine explores a finite symbolic arena (one node per discrete
location/integer vector, carrying a federation of reachable zones) and then
runs backward federation fixpoints on it: a greatest fixpoint for safety, a
least fixpoint (attractor) for reachability goals, both built on an exact
timed-predecessor operator.

Monitor deadlines never block time.  The delay closure of a node is clipped
to the "deadline box"; moving past the box is a forced crossing that drops
the monitor into its ERR location, raises its error flag, and frees its
now-irrelevant clocks.  Backward, a crossing acts as a delay target (when
the crossed state is winning) or as a region to be avoided by acting
strictly before the boundary (when it is losing) - the last-chance
mechanism.

Mirroring: in post-shield games a system output, while no fault is flagged
and the observation is legal, is forwarded atomically as its primed copy.
The compound transition is uncontrollable; suppression (no forward) happens
exactly where the primed copy would be illegal.

Everything is deterministic: components, labels and zone pieces are iterated
in fixed order, so repeated solves produce identical regions and strategies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import zones as zn
from .errors import (
    InitialStateLosing,
    TshieldError,
)
from .monitor import Monitor, build_monitor, spec_location
from .tioa import Edge, Tioa, _int_guard_holds, complete_inputs

__all__ = [
    "GameComponent",
    "GameNet",
    "Arena",
    "BadRegion",
    "explore",
    "upre",
    "cpre",
    "predt",
    "solve_safety",
    "boundary",
    "solve_leadsto",
    "attractor",
    "recovery_goal",
    "RecoveryGoal",
    "Strategy",
    "refinement_search",
]

MAX_ARENA_NODES = 20000
MAX_FIXPOINT_ROUNDS = 100000


@dataclass(frozen=True)
class GameComponent:
    """One parallel component plus its timing discipline.

    ``deadlines`` marks observer components: time never blocks there, but
    crossing the deadline forces the component into ``err``.  Components
    without deadlines use their invariants as hard time bounds.
    """

    tioa: Tioa
    deadlines: Mapping[str, tuple[zn.Constraint, ...]] = field(default_factory=dict)
    err: str = ""
    error_var: str = ""

    @staticmethod
    def of(m) -> "GameComponent":
        if isinstance(m, GameComponent):
            return m
        if isinstance(m, Monitor):
            return GameComponent(m.base, dict(m.deadlines), m.err, m.error_var)
        return GameComponent(m)

    @property
    def name(self):
        return self.tioa.name


@dataclass(frozen=True)
class BadRegion:
    """Conjunctive bad-state description: location membership per component,
    integer values, and an optional zone part (None = everywhere)."""

    locs: tuple[tuple[int, frozenset], ...] = ()
    ints: tuple[tuple[str, frozenset], ...] = ()
    fed: tuple[zn.Zone, ...] | None = None

    def matches_key(self, locs, ints) -> bool:
        for idx, allowed in self.locs:
            if locs[idx] not in allowed:
                return False
        intd = dict(ints)
        for var, allowed in self.ints:
            if intd.get(var) not in allowed:
                return False
        return True


class GameNet:
    """A network of components with controllable/uncontrollable labels.

    ``mirror`` maps an observed label to the primed label forwarded
    atomically while every error flag is still 0; ``extra_clocks`` appends
    clocks owned by no component (the recovery stopwatch);
    ``error_reset_clocks`` are reset whenever an error flag flips to 1.
    """

    def __init__(self, components: Sequence, controllable: Iterable[str],
                 uncontrollable: Iterable[str], bad: Sequence[BadRegion] = (),
                 mirror: Mapping[str, str] | None = None,
                 extra_clocks: Sequence[str] = (),
                 error_reset_clocks: Sequence[int] = (),
                 extra_max_consts: Mapping[int, int] | None = None):
        self.components = tuple(GameComponent.of(c) for c in components)
        self.controllable = frozenset(controllable)
        self.uncontrollable = frozenset(uncontrollable)
        self.bad = tuple(bad)
        self.mirror = dict(mirror or {})
        self.extra_clocks = tuple(extra_clocks)
        self.error_reset_clocks = tuple(error_reset_clocks)
        self.error_vars = tuple(
            c.error_var for c in self.components if c.error_var
        )
        self._offsets = []
        off = 0
        for c in self.components:
            self._offsets.append(off)
            off += len(c.tioa.clocks)
        self.n_clocks = off + len(self.extra_clocks)
        self._extra_consts = dict(extra_max_consts or {})

    # -- indexing --------------------------------------------------------

    def offset(self, idx: int) -> int:
        return self._offsets[idx]

    def extra_clock_index(self, name: str) -> int:
        base = self._offsets[-1] + len(self.components[-1].tioa.clocks)
        return base + self.extra_clocks.index(name) + 1

    def shift(self, idx: int, c: zn.Constraint) -> zn.Constraint:
        off = self.offset(idx)
        return zn.Constraint(c.clock + off if c.clock else 0, c.rel, c.value,
                             c.other + off if c.other else 0)

    def shifted(self, idx: int, guard) -> list[zn.Constraint]:
        return [self.shift(idx, c) for c in guard]

    def clock_names(self) -> list[str]:
        out = []
        for c in self.components:
            out.extend(f"{c.name}.{x}" for x in c.tioa.clocks)
        out.extend(self.extra_clocks)
        return out

    @property
    def ceilings(self) -> list[int]:
        k = [0] * self.n_clocks
        for i, comp in enumerate(self.components):
            off = self.offset(i)
            t = comp.tioa
            sources = [e.guard for e in t.edges]
            sources += [t.invariant_of(l) for l in t.locations]
            sources += list(comp.deadlines.values())
            for guard in sources:
                for con in guard:
                    v = abs(con.value)
                    if con.clock:
                        k[off + con.clock - 1] = max(k[off + con.clock - 1], v)
                    if con.other:
                        k[off + con.other - 1] = max(k[off + con.other - 1], v)
        for r in self.bad:
            for z in (r.fed or ()):
                if z.is_empty():
                    continue
                for i in range(z.n + 1):
                    for j in range(z.n + 1):
                        b = z.m[i][j]
                        if i != j and b < zn.INF:
                            v = abs(zn.bound_value(b))
                            if i:
                                k[i - 1] = max(k[i - 1], v)
                            if j:
                                k[j - 1] = max(k[j - 1], v)
        for idx, v in self._extra_consts.items():
            k[idx - 1] = max(k[idx - 1], v)
        return k

    # -- keys -------------------------------------------------------------

    def initial_key(self):
        locs = tuple(c.tioa.initial for c in self.components)
        ints: dict[str, int] = {}
        for c in self.components:
            for var, (_l, _h, init) in c.tioa.int_vars.items():
                ints.setdefault(var, init)
        return locs, tuple(sorted(ints.items()))

    def initial_zone(self) -> zn.Zone:
        locs, _ = self.initial_key()
        return zn.intersect(zn.zone_zero(self.n_clocks), self.invariants(locs))

    def invariants(self, locs) -> list[zn.Constraint]:
        out = []
        for i, c in enumerate(self.components):
            if not c.deadlines:
                out.extend(self.shifted(i, c.tioa.invariant_of(locs[i])))
        return out

    def deadline_box(self, locs) -> list[zn.Constraint]:
        out = []
        for i, c in enumerate(self.components):
            if c.err and locs[i] == c.err:
                continue
            out.extend(self.shifted(i, c.deadlines.get(locs[i], ())))
        return out

    def bad_fed(self, locs, ints) -> list[zn.Zone]:
        hits = []
        for region in self.bad:
            if not region.matches_key(locs, ints):
                continue
            if region.fed is None:
                return [zn.zone_universe(self.n_clocks)]
            hits.extend(region.fed)
        return zn.fed_reduce(hits)

    def errors_clear(self, ints) -> bool:
        intd = dict(ints)
        return all(intd.get(v, 0) == 0 for v in self.error_vars)


# ------------------------------------------------------------------- moves


@dataclass(frozen=True)
class Move:
    label: str
    controllable: bool
    guard: zn.Zone                       # global coordinates
    src_key: tuple
    dst_key: tuple
    resets: tuple[int, ...]              # global clock indices
    swaps: tuple[tuple[int, int], ...]   # global (dst <- src) pairs
    freed: tuple[int, ...]               # clocks of components entering ERR
    mirrored: str = ""                   # primed label forwarded atomically

    def apply(self, z: zn.Zone, k) -> zn.Zone:
        z = zn.intersect(z, self.guard)
        if z.is_empty():
            return z
        if self.swaps:
            z = zn.swap_clocks(z, dict(self.swaps))
        if self.resets:
            z = zn.reset(z, self.resets)
        if self.freed:
            z = zn.free(z, self.freed)
        return zn.extrapolate(z, k)

    def pre(self, fed: Iterable[zn.Zone]) -> list[zn.Zone]:
        """Source states whose image lands in ``fed``; target sets are free
        in the ``freed`` clocks, so freeing needs no inversion."""
        out = []
        for w in fed:
            z = w
            if self.resets:
                z = zn.intersect(z, [zn.Constraint(x, "<=", 0) for x in self.resets])
                if z.is_empty():
                    continue
                z = zn.free(z, self.resets)
            if self.swaps:
                inverse = {src: dst for dst, src in self.swaps}
                z = zn.swap_clocks(z, inverse)
            z = zn.intersect(z, self.guard)
            if not z.is_empty():
                out.append(z)
        return zn.fed_reduce(out)


@dataclass(frozen=True)
class Crossing:
    """Forced deadline crossing.  ``region`` is the past-the-boundary
    federation in source-ray coordinates; entering it places the ``crossed``
    components in ERR, resets ``resets`` (stopwatches) and frees ``freed``."""

    src_key: tuple
    dst_key: tuple
    crossed: tuple[int, ...]
    region: tuple[zn.Zone, ...]
    resets: tuple[int, ...]
    freed: tuple[int, ...]

    def entry(self, upclosed: zn.Zone, k) -> list[zn.Zone]:
        out = []
        for r in self.region:
            z = zn.intersect(upclosed, r)
            if z.is_empty():
                continue
            if self.resets:
                z = zn.reset(z, self.resets)
            if self.freed:
                z = zn.free(z, self.freed)
            out.append(zn.extrapolate(z, k))
        return out

    def pre(self, fed: Iterable[zn.Zone]) -> list[zn.Zone]:
        """Ray points within the region whose crossed state lands in ``fed``."""
        out = []
        for w in fed:
            z = w
            if self.resets:
                z = zn.intersect(z, [zn.Constraint(x, "<=", 0) for x in self.resets])
                if z.is_empty():
                    continue
                z = zn.free(z, self.resets)
            for r in self.region:
                piece = zn.intersect(z, r)
                if not piece.is_empty():
                    out.append(piece)
        return zn.fed_reduce(out)


class Arena:
    """Forward-explored symbolic arena; nodes keyed by (locations, ints)."""

    def __init__(self, net: GameNet):
        self.net = net
        self.nodes: dict[tuple, list[zn.Zone]] = {}
        self.order: list[tuple] = []
        self._moves: dict[tuple, list[Move]] = {}
        self._crossings: dict[tuple, list[Crossing]] = {}
        self._preds: dict[tuple, list[tuple]] = {}

    def fed(self, key) -> list[zn.Zone]:
        return self.nodes.get(key, [])

    def moves(self, key) -> list[Move]:
        if key not in self._moves:
            self._moves[key] = _enumerate_moves(self.net, key)
        return self._moves[key]

    def crossings(self, key) -> list[Crossing]:
        if key not in self._crossings:
            self._crossings[key] = _enumerate_crossings(self.net, key)
        return self._crossings[key]

    def preds(self, key) -> list[tuple]:
        return self._preds.get(key, [])

    def link(self, src, dst):
        lst = self._preds.setdefault(dst, [])
        if src not in lst:
            lst.append(src)

    def contains_state(self, key, valuation) -> bool:
        return zn.fed_contains(self.fed(key), valuation)


def _options_for(net: GameNet, comp_idx: int, loc: str, label: str, intd) -> list:
    """Per-participant branches: (edge, zones); a trailing (None, gap) covers
    whatever region no edge covers (the participant stays put there)."""
    comp = net.components[comp_idx]
    t = comp.tioa
    opts = []
    covered: list[zn.Zone] = []
    for e in t.edges_from(loc, label):
        if e.link:
            continue  # mirror edges fire only inside the compound
        if not _int_guard_holds(e.int_guard, intd):
            continue
        z = zn.from_constraints(net.n_clocks, net.shifted(comp_idx, e.guard))
        if z.is_empty():
            continue
        opts.append((e, [z]))
        covered.append(z)
    gap = zn.fed_subtract([zn.zone_universe(net.n_clocks)], covered)
    if gap:
        opts.append((None, gap))
    return opts


def _apply_effects(net: GameNet, locs, ints, chosen):
    """New key plus global reset/swap/free lists for a combo of edges."""
    locs = list(locs)
    intd = dict(ints)
    resets: list[int] = []
    swaps: list[tuple[int, int]] = []
    freed: list[int] = []
    for comp_idx, e in chosen:
        comp = net.components[comp_idx]
        off = net.offset(comp_idx)
        for dst_c, src_c in e.swaps:
            swaps.append((off + dst_c, off + src_c))
        for x in e.resets:
            resets.append(off + x)
        for var, value in e.int_update:
            intd[var] = value
        if comp.err and e.dst == comp.err and locs[comp_idx] != comp.err:
            freed.extend(off + i + 1 for i in range(len(comp.tioa.clocks)))
            if comp.error_var:
                intd[comp.error_var] = 1
        locs[comp_idx] = e.dst
    old = dict(ints)
    flip = any(
        intd.get(v, 0) == 1 and old.get(v, 0) == 0 for v in net.error_vars
    )
    if flip:
        resets.extend(net.error_reset_clocks)
    return (tuple(locs), tuple(sorted(intd.items()))), tuple(sorted(set(resets))), \
        tuple(swaps), tuple(sorted(set(freed)))


def _enumerate_moves(net: GameNet, key) -> list[Move]:
    locs, ints = key
    intd = dict(ints)
    moves: list[Move] = []
    err_owner = next(
        (i for i, c in enumerate(net.components) if c.error_var), None
    )
    for label in sorted(net.controllable | net.uncontrollable):
        controllable = label in net.controllable
        participants = [
            i for i, c in enumerate(net.components)
            if label in c.tioa.outputs or label in c.tioa.inputs
        ]
        if not participants:
            continue
        owner = next(
            (i for i in participants if label in net.components[i].tioa.outputs),
            None,
        )
        option_lists = []
        dead_end = False
        for i in participants:
            opts = _options_for(net, i, locs[i], label, intd)
            if i == owner:
                opts = [(e, zs) for e, zs in opts if e is not None]
                if not opts:
                    dead_end = True
                    break
            option_lists.append((i, opts))
        if dead_end:
            continue
        combos = [([], [zn.zone_universe(net.n_clocks)])]
        for i, opts in option_lists:
            nxt = []
            for chosen, fed in combos:
                for e, zs in opts:
                    inter = zn.fed_intersect(fed, zs)
                    if not inter:
                        continue
                    nxt.append((chosen + [(i, e)] if e is not None else list(chosen), inter))
            combos = nxt
        mirrored_label = net.mirror.get(label, "")
        mirror_on = bool(mirrored_label) and net.errors_clear(ints)
        for chosen, fed in combos:
            wrong = any(
                i == err_owner and net.components[i].err and e.dst == net.components[i].err
                for i, e in chosen
            )
            variants = []
            if mirror_on and not wrong:
                listener = next(
                    (i for i, c in enumerate(net.components)
                     if mirrored_label in c.tioa.inputs), None
                )
                if listener is None:
                    variants.append((chosen, fed, ""))
                else:
                    for e, zs in _options_for(net, listener, locs[listener], mirrored_label, intd):
                        inter = zn.fed_intersect(fed, zs)
                        if not inter:
                            continue
                        comp = net.components[listener]
                        if e is None or (comp.err and e.dst == comp.err):
                            # forwarding would be illegal: suppress instead
                            variants.append((chosen, inter, ""))
                        else:
                            variants.append((chosen + [(listener, e)], inter, mirrored_label))
            else:
                variants.append((chosen, fed, ""))
            for combo, pieces, mirrored in variants:
                if not combo:
                    continue  # nobody moves: the event is a visible no-op
                dst_key, resets, swaps, freed = _apply_effects(net, locs, ints, combo)
                for piece in pieces:
                    moves.append(Move(
                        label=label,
                        controllable=controllable,
                        guard=piece,
                        src_key=key,
                        dst_key=dst_key,
                        resets=resets,
                        swaps=swaps,
                        freed=freed,
                        mirrored=mirrored,
                    ))
    return moves


def _negated(net: GameNet, cons: Sequence[zn.Constraint]) -> list[zn.Zone]:
    """Complement of a conjunction, as a federation."""
    out = []
    universe = zn.zone_universe(net.n_clocks)
    for c in cons:
        i, j, b = c.dbm_entry()
        neg = zn.bound_neg(b)
        m = universe.rows()
        if neg < m[j][i]:
            m[j][i] = neg
        z = zn.Zone(net.n_clocks, m)
        if not z.is_empty():
            out.append(z)
    return out


def _enumerate_crossings(net: GameNet, key) -> list[Crossing]:
    locs, ints = key
    holders = []
    for i, comp in enumerate(net.components):
        if comp.err and locs[i] == comp.err:
            continue
        cons = net.shifted(i, comp.deadlines.get(locs[i], ()))
        if cons:
            holders.append((i, cons))
    out: list[Crossing] = []
    for r in range(1, len(holders) + 1):
        for subset in itertools.combinations(holders, r):
            crossed = tuple(i for i, _ in subset)
            region = [zn.zone_universe(net.n_clocks)]
            for _i, cons in subset:
                region = zn.fed_intersect(region, _negated(net, cons))
            within = []
            for i, cons in holders:
                if i not in crossed:
                    within.extend(cons)
            within.extend(net.invariants(locs))
            region = [zn.intersect(z, within) for z in region]
            region = [z for z in region if not z.is_empty()]
            if not region:
                continue
            new_locs = list(locs)
            intd = dict(ints)
            freed: list[int] = []
            flip = False
            for i in crossed:
                comp = net.components[i]
                new_locs[i] = comp.err
                off = net.offset(i)
                freed.extend(off + c + 1 for c in range(len(comp.tioa.clocks)))
                if comp.error_var and intd.get(comp.error_var, 0) == 0:
                    intd[comp.error_var] = 1
                    flip = True
            out.append(Crossing(
                src_key=key,
                dst_key=(tuple(new_locs), tuple(sorted(intd.items()))),
                crossed=crossed,
                region=tuple(region),
                resets=tuple(net.error_reset_clocks) if flip else (),
                freed=tuple(sorted(freed)),
            ))
    return out


# ---------------------------------------------------------------- explore


def explore(net: GameNet) -> Arena:
    """Forward zone-graph exploration with extrapolation.

    Every node's federation is delay-closed inside its deadline box;
    crossing the box spawns entries at the ERR-shifted keys.
    """
    arena = Arena(net)
    k = net.ceilings
    init_key = net.initial_key()
    worklist: list[tuple[tuple, zn.Zone]] = [(init_key, net.initial_zone())]
    rounds = 0
    while worklist:
        rounds += 1
        if rounds > MAX_FIXPOINT_ROUNDS or len(arena.nodes) > MAX_ARENA_NODES:
            raise TshieldError("arena exploration did not converge (model too large?)")
        key, entry = worklist.pop(0)
        locs, ints = key
        if key not in arena.nodes:
            arena.nodes[key] = []
            arena.order.append(key)
        closed = zn.intersect(zn.up(entry), net.invariants(locs) + net.deadline_box(locs))
        closed = zn.extrapolate(closed, k)
        fresh = []
        if not closed.is_empty() and not zn.fed_is_subset([closed], arena.nodes[key]):
            fresh = [closed]
            arena.nodes[key] = zn.fed_reduce(arena.nodes[key] + fresh)
        up_entry = zn.extrapolate(zn.intersect(zn.up(entry), net.invariants(locs)), k)
        for crossing in arena.crossings(key):
            for piece in crossing.entry(up_entry, k):
                if piece.is_empty():
                    continue
                tgt = arena.nodes.get(crossing.dst_key)
                if tgt is None or not zn.fed_is_subset([piece], tgt):
                    worklist.append((crossing.dst_key, piece))
        for move in arena.moves(key):
            for z in fresh:
                img = move.apply(z, k)
                if img.is_empty():
                    continue
                tgt = arena.nodes.get(move.dst_key)
                if tgt is None or not zn.fed_is_subset([img], tgt):
                    worklist.append((move.dst_key, img))
    for key in arena.order:
        for move in arena.moves(key):
            if move.dst_key in arena.nodes:
                arena.link(key, move.dst_key)
        for crossing in arena.crossings(key):
            if crossing.dst_key in arena.nodes:
                arena.link(key, crossing.dst_key)
    return arena


# ------------------------------------------------------------------ predt


def _before(b: zn.Zone) -> list[zn.Zone]:
    """Points strictly before b on their delay ray."""
    return zn.fed_subtract([zn.down(b)], [b])


def predt(goods: Sequence[zn.Zone], bads: Sequence[zn.Zone]) -> list[zn.Zone]:
    """Timed predecessors with avoidance: states that can delay into the
    goods without touching the bads on the way (endpoint included; standing
    in a bad state or grazing it loses, i.e. ties favour the opponent)."""
    goods = zn.fed_reduce(list(goods))
    bads = zn.fed_reduce(list(bads))
    keep = []
    for b in bads:
        down_b = zn.down(b)
        if any(not zn.intersect(down_b, zn.down(g)).is_empty() for g in goods):
            keep.append(b)
    # a bad inside another is avoided for free
    bads = [
        b for i, b in enumerate(keep)
        if not any(j != i and zn.is_subset(b, keep[j]) and not (zn.is_subset(keep[j], b) and j > i)
                   for j in range(len(keep)))
    ]
    out: list[zn.Zone] = []

    def rec(g_fed, pending, collected):
        if not g_fed:
            return
        while pending:
            b = pending[0]
            down_b = zn.down(b)
            if any(not zn.intersect(down_b, zn.down(g)).is_empty() for g in g_fed):
                break
            pending = pending[1:]  # b never lies ahead of these goods
        if not pending:
            out.extend(zn.fed_subtract(zn.fed_down(g_fed), zn.fed_down(collected)))
            return
        b, rest = pending[0], pending[1:]
        rec(zn.fed_intersect(g_fed, _before(b)), rest, collected)   # act before b
        rec(g_fed, rest, collected + [b])                           # b never ahead

    rec(list(goods), list(bads), [])
    return zn.fed_reduce(out)


# --------------------------------------------------------------- fixpoints


WinningRegion = dict  # key -> list[Zone]


@dataclass
class Strategy:
    """Maximally permissive memoryless strategy: per key, zones where each
    controllable action stays winning plus zones where delaying does."""

    allowed: dict   # key -> {label: [Zone]}
    delay_ok: dict  # key -> [Zone]

    def actions_at(self, key, valuation) -> set[str]:
        out = set()
        for label, fed in self.allowed.get(key, {}).items():
            if zn.fed_contains(fed, valuation):
                out.add(label)
        if zn.fed_contains(self.delay_ok.get(key, []), valuation):
            out.add("delay")
        return out


def cpre(arena: Arena, W: WinningRegion, key) -> list[zn.Zone]:
    """One application of the controllable timed predecessor at ``key``."""
    net = arena.net
    goods: list[zn.Zone] = []
    bads: list[zn.Zone] = list(net.bad_fed(*key))
    exits: list[zn.Zone] = []
    for m in arena.moves(key):
        if m.controllable:
            goods.extend(m.pre(W.get(m.dst_key, [])))
        else:
            lose = zn.fed_subtract(arena.fed(m.dst_key), W.get(m.dst_key, []))
            bads.extend(m.pre(lose))
    for c in arena.crossings(key):
        win = c.pre(W.get(c.dst_key, []))
        goods.extend(win)
        bads.extend(zn.fed_subtract(list(c.region), win))
        exits.extend(c.region)
    bads = zn.fed_reduce(bads)
    stay = zn.fed_subtract(W.get(key, []), zn.fed_down(bads + exits))
    return predt(goods + stay, bads)


def upre(arena: Arena, X: WinningRegion) -> WinningRegion:
    """States from which some uncontrollable action (or forced crossing)
    lands in X without any delay."""
    out: WinningRegion = {}
    for key in arena.order:
        hit = []
        for m in arena.moves(key):
            if not m.controllable:
                hit.extend(m.pre(X.get(m.dst_key, [])))
        for c in arena.crossings(key):
            hit.extend(c.pre(X.get(c.dst_key, [])))
        hit = zn.fed_intersect(zn.fed_reduce(hit), arena.fed(key))
        if hit:
            out[key] = hit
    return out


def solve_safety(net_or_arena, bad: Sequence[BadRegion] | None = None):
    """Greatest fixpoint of the safety game: (arena, W, strategy).

    Raises InitialStateLosing when the initial state falls outside W.
    """
    if isinstance(net_or_arena, Arena):
        arena = net_or_arena
        net = arena.net
    else:
        net = net_or_arena
        if bad is not None:
            net.bad = tuple(bad)
        arena = explore(net)
    W: WinningRegion = {}
    for key in arena.order:
        W[key] = zn.fed_subtract(arena.fed(key), net.bad_fed(*key))
    pending = list(arena.order)
    in_queue = set(pending)
    rounds = 0
    while pending:
        rounds += 1
        if rounds > MAX_FIXPOINT_ROUNDS:
            raise TshieldError("safety fixpoint did not converge")
        key = pending.pop(0)
        in_queue.discard(key)
        if not W.get(key):
            continue
        new = zn.fed_intersect(W[key], cpre(arena, W, key))
        if not zn.fed_equal(new, W[key]):
            W[key] = new
            for p in arena.preds(key) + [key]:
                if p not in in_queue:
                    pending.append(p)
                    in_queue.add(p)
    strategy = extract_strategy(arena, W)
    init_key = net.initial_key()
    if not zn.fed_is_subset([net.initial_zone()], W.get(init_key, [])):
        raise InitialStateLosing("initial state is outside the winning region")
    return arena, W, strategy


def extract_strategy(arena: Arena, W: WinningRegion) -> Strategy:
    allowed: dict = {}
    delay_ok: dict = {}
    for key in arena.order:
        if not W.get(key):
            continue
        per_label: dict[str, list[zn.Zone]] = {}
        for m in arena.moves(key):
            if not m.controllable:
                continue
            fed = zn.fed_intersect(m.pre(W.get(m.dst_key, [])), W[key])
            if fed:
                per_label[m.label] = zn.fed_union(per_label.get(m.label, []), fed)
        allowed[key] = per_label
        delay_ok[key] = _delay_interior(arena, W, key)
    return Strategy(allowed, delay_ok)


def _delay_interior(arena: Arena, W: WinningRegion, key) -> list[zn.Zone]:
    """States of W whose immediate future stays winning (within the node or
    through a winning crossing)."""
    nbhd = [zn.right_open(w) for w in W.get(key, [])]
    for c in arena.crossings(key):
        for piece in c.pre(W.get(c.dst_key, [])):
            nbhd.append(zn.right_open(piece))
    return zn.fed_intersect(W.get(key, []), zn.fed_reduce(nbhd))


def boundary(arena: Arena, W: WinningRegion) -> dict:
    """Last-chance set: winning states that any positive delay abandons."""
    out = {}
    for key in arena.order:
        if not W.get(key):
            continue
        fed = zn.fed_subtract(W[key], _delay_interior(arena, W, key))
        if fed:
            out[key] = fed
    return out


# ----------------------------------------------------------- reachability


def attractor(arena: Arena, W: WinningRegion, goal: Mapping) -> WinningRegion:
    """Least fixpoint: states from which the controller forces a goal state
    while staying in W; ``goal`` maps key -> federation."""
    net = arena.net
    A: WinningRegion = {}

    def target(k):
        return zn.fed_union(A.get(k, []),
                            zn.fed_intersect(goal.get(k, []), W.get(k, [])))

    pending = list(arena.order)
    in_queue = set(pending)
    rounds = 0
    while pending:
        rounds += 1
        if rounds > MAX_FIXPOINT_ROUNDS:
            raise TshieldError("attractor fixpoint did not converge")
        key = pending.pop(0)
        in_queue.discard(key)
        if not W.get(key):
            continue
        goods: list[zn.Zone] = list(target(key))
        bads: list[zn.Zone] = list(net.bad_fed(*key))
        bads.extend(zn.fed_subtract(arena.fed(key), W.get(key, [])))
        for m in arena.moves(key):
            if m.controllable:
                goods.extend(m.pre(target(m.dst_key)))
            else:
                lose = zn.fed_subtract(arena.fed(m.dst_key), target(m.dst_key))
                bads.extend(m.pre(lose))
        for c in arena.crossings(key):
            win = c.pre(target(c.dst_key))
            goods.extend(win)
            bads.extend(zn.fed_subtract(list(c.region), win))
        new = zn.fed_intersect(W.get(key, []), predt(goods, bads))
        new = zn.fed_union(A.get(key, []), new)
        if not zn.fed_equal(new, A.get(key, [])):
            A[key] = new
            for p in arena.preds(key) + [key]:
                if p not in in_queue:
                    pending.append(p)
                    in_queue.add(p)
    return A


# ---------------------------------------------------------------- leadsto


@dataclass(frozen=True)
class RecoveryGoal:
    """Alignment predicate: every live fault monitor shares its projected
    location and exact clock values with the primed monitor."""

    fault_idx: tuple[int, ...]
    primed_idx: int
    err_of: tuple[str, ...]
    primed_err: str

    def fed_at(self, net: GameNet, locs) -> list[zn.Zone]:
        cons: list[zn.Constraint] = []
        p_loc = locs[self.primed_idx]
        if p_loc == self.primed_err:
            return []
        for fi, err in zip(self.fault_idx, self.err_of):
            loc = locs[fi]
            if loc == err:
                continue  # discarded hypothesis: satisfied vacuously
            if spec_location(loc) != spec_location(p_loc):
                return []
            off_f = net.offset(fi)
            off_p = net.offset(self.primed_idx)
            for c in range(1, len(net.components[fi].tioa.clocks) + 1):
                cons.append(zn.Constraint(off_f + c, "<=", 0, off_p + c))
                cons.append(zn.Constraint(off_p + c, "<=", 0, off_f + c))
        z = zn.from_constraints(net.n_clocks, cons)
        return [] if z.is_empty() else [z]

    def holds_concrete(self, net: GameNet, locs, vals) -> bool:
        return zn.fed_contains(self.fed_at(net, locs), vals)

    def violation_regions(self, net: GameNet) -> list[BadRegion]:
        """Not-goal, split into conjunctive bad regions."""
        out = []
        pcomp = net.components[self.primed_idx]
        plive = sorted(set(pcomp.tioa.locations) - {self.primed_err})
        for fi, err in zip(self.fault_idx, self.err_of):
            comp = net.components[fi]
            live = sorted(l for l in comp.tioa.locations if l != err)
            off_f = net.offset(fi)
            off_p = net.offset(self.primed_idx)
            diff_zones = []
            for c in range(1, len(comp.tioa.clocks) + 1):
                diff_zones.append(zn.from_constraints(
                    net.n_clocks, [zn.Constraint(off_f + c, "<", 0, off_p + c)]))
                diff_zones.append(zn.from_constraints(
                    net.n_clocks, [zn.Constraint(off_p + c, "<", 0, off_f + c)]))
            for floc in live:
                for ploc in plive:
                    pair = ((fi, frozenset({floc})), (self.primed_idx, frozenset({ploc})))
                    if spec_location(floc) != spec_location(ploc):
                        out.append(BadRegion(locs=pair))
                    else:
                        out.append(BadRegion(locs=pair, fed=tuple(diff_zones)))
        return out


def recovery_goal(net: GameNet, fault_idx: Sequence[int], primed_idx: int) -> RecoveryGoal:
    return RecoveryGoal(
        fault_idx=tuple(fault_idx),
        primed_idx=primed_idx,
        err_of=tuple(net.components[i].err for i in fault_idx),
        primed_err=net.components[primed_idx].err,
    )


def goal_map(arena: Arena, goal: RecoveryGoal) -> dict:
    out = {}
    for key in arena.order:
        locs, _ints = key
        fed = zn.fed_intersect(goal.fed_at(arena.net, locs), arena.fed(key))
        if fed:
            out[key] = fed
    return out


def solve_leadsto(net: GameNet, goal: RecoveryGoal, trigger_var: str = "error",
                  bound: int | None = None, rec_clock: str = "rec"):
    """Safety plus recovery: always avoid the bad regions and, from every
    reachable state with ``trigger_var`` raised, force the goal (within
    ``bound`` time units when given, metered by the stopwatch clock).

    Returns (arena, W, strategy, attractor_region, goal_map).
    """
    bad = list(net.bad)
    if bound is not None:
        rec_idx = net.extra_clock_index(rec_clock)
        late = zn.from_constraints(net.n_clocks, [zn.Constraint(rec_idx, ">", bound)])
        for region in goal.violation_regions(net):
            if region.fed is None:
                timeout_fed = (late,)
            else:
                timeout_fed = tuple(
                    z for z in (zn.intersect(f, late) for f in region.fed)
                    if not z.is_empty()
                )
            if not timeout_fed:
                continue
            bad.append(BadRegion(
                locs=region.locs,
                ints=region.ints + ((trigger_var, frozenset({1})),),
                fed=timeout_fed,
            ))
    net.bad = tuple(bad)
    arena, W, strategy = solve_safety(net)
    goals = goal_map(arena, goal)
    A = attractor(arena, W, goals)
    offending = _trigger_gap(arena, W, A, goals, trigger_var)
    if offending is not None:
        raise InitialStateLosing(
            "recovery cannot be guaranteed from reachable state "
            f"{offending[0][0]}"
        )
    return arena, W, strategy, A, goals


def _trigger_gap(arena, W, A, goals, trigger_var):
    """A winning, fault-flagged state outside attractor-or-goal, if any."""
    for key in arena.order:
        _locs, ints = key
        if dict(ints).get(trigger_var, 0) != 1:
            continue
        covered = zn.fed_union(A.get(key, []), goals.get(key, []))
        stuck = zn.fed_subtract(W.get(key, []), covered)
        if stuck:
            return key, stuck
    return None


# -------------------------------------------------------------- refinement


def refinement_search(impl: Tioa, spec: Tioa):
    """Witness-producing refinement check via monitor composition.

    Explores the joint zone graph of the (input-completed) implementation
    and the specification monitor; returns (True, None) or (False, witness)
    with a concrete alternating (delay, action) trace, possibly ending in a
    bare delay that overruns a deadline of the spec.
    """
    mon = build_monitor(spec, name="mSpec")
    impl_c = complete_inputs(impl)
    net = GameNet(
        [GameComponent(impl_c), GameComponent.of(mon)],
        controllable=[],
        uncontrollable=sorted(set(impl_c.outputs) | set(impl_c.inputs) | set(mon.base.inputs)),
        bad=[BadRegion(locs=((1, frozenset({mon.err})),))],
    )
    k = net.ceilings
    init_key = net.initial_key()
    init = (init_key, net.initial_zone())
    seen: dict[tuple, list[zn.Zone]] = {init_key: [init[1]]}
    parents: dict = {init: None}
    queue = [init]
    bad_hit = None
    rounds = 0
    while queue and bad_hit is None:
        rounds += 1
        if rounds > MAX_FIXPOINT_ROUNDS:
            raise TshieldError("refinement search did not converge")
        node = queue.pop(0)
        key, entry = node
        locs, _ints = key
        closed = zn.extrapolate(
            zn.intersect(zn.up(entry), net.invariants(locs) + net.deadline_box(locs)), k
        )
        up_entry = zn.extrapolate(zn.intersect(zn.up(entry), net.invariants(locs)), k)
        succs = []
        for c in _enumerate_crossings(net, key):
            for piece in c.entry(up_entry, k):
                if not piece.is_empty():
                    succs.append(((c.dst_key, piece), ("cross", c)))
        if not closed.is_empty():
            for m in _enumerate_moves(net, key):
                img = m.apply(closed, k)
                if not img.is_empty():
                    succs.append(((m.dst_key, img), ("move", m)))
        for succ, how in succs:
            dst_key, piece = succ
            fed = seen.get(dst_key, [])
            if zn.fed_is_subset([piece], fed):
                continue
            seen[dst_key] = zn.fed_reduce(fed + [piece])
            parents[succ] = (node, how)
            if net.bad_fed(*dst_key):
                bad_hit = succ
                break
            queue.append(succ)
    if bad_hit is None:
        return True, None
    return False, _concretize(net, parents, bad_hit)


def _concretize(net: GameNet, parents, last):
    """Turn a symbolic error path into a concrete (delay, action) trace;
    a trailing ("", delay) entry encodes a final deadline-overrunning wait."""
    path = []
    node = last
    while parents.get(node) is not None:
        prev, how = parents[node]
        path.append((prev, how, node))
        node = prev
    path.reverse()
    # backward feasibility: fire[i] = source-side zone from which step i can
    # be taken such that the rest of the path stays feasible
    fire: list[list[zn.Zone]] = [[] for _ in path]
    need_after = [last[1]]
    for i in range(len(path) - 1, -1, -1):
        (src_key, src_entry), (kind, obj), (_dst_key, dst_piece) = path[i]
        target = zn.fed_intersect(need_after, [dst_piece])
        locs, _ints = src_key
        box = net.invariants(locs) + net.deadline_box(locs)
        if kind == "move":
            pre = obj.pre(target)
            pre = [zn.intersect(z, box) for z in pre]
        else:
            pre = obj.pre(target)
        pre = [z for z in pre if not z.is_empty()]
        fire[i] = zn.fed_reduce(pre)
        need_after = zn.fed_intersect(zn.fed_down(fire[i]), [src_entry])
        if not need_after:
            raise TshieldError("witness reconstruction lost feasibility (bug)")
    trace: list[tuple[Fraction, str]] = []
    vals = tuple(Fraction(0) for _ in range(net.n_clocks))
    carried = Fraction(0)
    for i, ((_sk, _se), (kind, obj), _dst) in enumerate(path):
        d = _pick_delay(vals, fire[i])
        vals = tuple(v + d for v in vals)
        if kind == "move":
            vals = _apply_move_concrete(obj, vals)
            trace.append((carried + d, obj.label))
            carried = Fraction(0)
        else:
            # crossing: time simply passes the deadline (the region is
            # already strictly past it)
            carried += d
            if obj.resets:
                vals = tuple(
                    Fraction(0) if (ix + 1) in obj.resets else v
                    for ix, v in enumerate(vals)
                )
    if carried > 0:
        trace.append((carried, ""))
    return trace


def _apply_move_concrete(move: Move, vals):
    out = list(vals)
    if move.swaps:
        snap = list(out)
        for dst, src in move.swaps:
            out[dst - 1] = snap[src - 1]
    for x in move.resets:
        out[x - 1] = Fraction(0)
    return tuple(out)


def _pick_delay(vals, fed) -> Fraction:
    """Smallest pleasant delay d >= 0 with vals + d inside the federation."""
    best = None
    for z in fed:
        iv = _delay_interval(vals, z)
        if iv is None:
            continue
        cand = _nice_point(*iv)
        if cand is not None and (best is None or cand < best):
            best = cand
    if best is None:
        raise TshieldError("no admissible delay (bug in witness reconstruction)")
    return best


def _delay_interval(vals, z: zn.Zone):
    """Delays d with vals + d in z, as (lo, lo_strict, hi, hi_strict)."""
    if z.is_empty():
        return None
    lo, lo_strict = Fraction(0), False
    hi, hi_strict = None, False
    full = (Fraction(0),) + tuple(vals)
    for i in range(z.n + 1):
        for j in range(z.n + 1):
            b = z.m[i][j]
            if b >= zn.INF or i == j:
                continue
            val = Fraction(zn.bound_value(b))
            strict = zn.bound_is_strict(b)
            diff = full[i] - full[j]
            if i and j:
                if diff > val or (diff == val and strict):
                    return None
            elif i:  # xi + d (<|<=) val
                cap = val - full[i]
                if hi is None or cap < hi or (cap == hi and strict):
                    hi, hi_strict = cap, strict
            else:    # d (>|>=) -val - xj
                floor_ = -val - full[j]
                if floor_ > lo or (floor_ == lo and strict):
                    lo, lo_strict = floor_, strict
    if lo < 0:
        lo, lo_strict = Fraction(0), False
    if hi is not None and (lo > hi or (lo == hi and (lo_strict or hi_strict))):
        return None
    return lo, lo_strict, hi, hi_strict


def _nice_point(lo, lo_strict, hi, hi_strict):
    """A friendly rational in the interval: integers, then halves, quarters."""
    from math import ceil, floor

    if not lo_strict and lo.denominator in (1, 2, 4):
        return lo
    for denom in (1, 2, 4):
        scaled = lo * denom
        kk = floor(scaled)
        q = Fraction(kk, denom)
        if q < lo or (q == lo and lo_strict):
            q += Fraction(1, denom)
        if hi is None or q < hi or (q == hi and not hi_strict):
            return q
    if hi is None:
        return lo + 1
    if lo < hi:
        return (lo + hi) / 2
    return None if (lo_strict or hi_strict) else lo
