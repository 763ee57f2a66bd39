"""Discrete-time brute-force game solver.

An independent check on the zone engine: the same game network is played on
the half-unit time lattice with saturating clocks, and the winning set is
computed by plain fixpoint over the finite concrete state space.  Guards and
deadlines are evaluated directly on rational valuations; nothing from the
symbolic solver is reused beyond the model data itself.

Only diagonal-free games are supported (clock saturation would break
clock-difference tests), which covers all shipped safety games.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import TshieldError
from .game import GameNet
from .tioa import Edge, _int_guard_holds

STEP = Fraction(1, 2)


@dataclass(frozen=True)
class DState:
    locs: tuple
    ints: tuple
    vals: tuple  # Fractions, saturating at per-clock caps


class DiscreteGame:
    """Concrete semantics of a GameNet on the half-unit lattice."""

    def __init__(self, net: GameNet, horizon_states: int = 2_000_000):
        self.net = net
        self.caps = [Fraction(k + 1) for k in net.ceilings]
        self.horizon = horizon_states
        self._check_diagonal_free()

    def _check_diagonal_free(self):
        for comp in self.net.components:
            for e in comp.tioa.edges:
                if any(c.other for c in e.guard):
                    raise TshieldError("discrete oracle needs diagonal-free guards")
        for r in self.net.bad:
            if r.fed:
                for z in r.fed:
                    for i in range(1, z.n + 1):
                        for j in range(1, z.n + 1):
                            if i != j and z.m[i][j] < (1 << 62):
                                raise TshieldError(
                                    "discrete oracle needs diagonal-free bad regions"
                                )

    # -- basic evaluation ------------------------------------------------

    def initial(self) -> DState:
        locs, ints = self.net.initial_key()
        return DState(locs, ints, tuple(Fraction(0) for _ in range(self.net.n_clocks)))

    def _guard_holds(self, comp_idx: int, guard, vals) -> bool:
        off = self.net.offset(comp_idx)
        for c in guard:
            v = vals[off + c.clock - 1]
            w = Fraction(c.value)
            if c.rel == "<" and not v < w:
                return False
            if c.rel == "<=" and not v <= w:
                return False
            if c.rel == ">=" and not v >= w:
                return False
            if c.rel == ">" and not v > w:
                return False
        return True

    def _edge_for(self, s: DState, comp_idx: int, label: str) -> Edge | None:
        comp = self.net.components[comp_idx]
        intd = dict(s.ints)
        for e in comp.tioa.edges_from(s.locs[comp_idx], label):
            if e.link:
                continue
            if not _int_guard_holds(e.int_guard, intd):
                continue
            if self._guard_holds(comp_idx, e.guard, s.vals):
                return e
        return None

    def _apply(self, s: DState, chosen) -> DState:
        locs = list(s.locs)
        intd = dict(s.ints)
        vals = list(s.vals)
        flip = False
        for comp_idx, e in chosen:
            comp = self.net.components[comp_idx]
            off = self.net.offset(comp_idx)
            if e.swaps:
                snap = list(vals)
                for dst_c, src_c in e.swaps:
                    vals[off + dst_c - 1] = snap[off + src_c - 1]
            for x in e.resets:
                vals[off + x - 1] = Fraction(0)
            for var, value in e.int_update:
                intd[var] = value
            if comp.err and e.dst == comp.err and locs[comp_idx] != comp.err:
                if comp.error_var and intd.get(comp.error_var, 0) == 0:
                    intd[comp.error_var] = 1
                    flip = True
            locs[comp_idx] = e.dst
        if flip:
            for x in self.net.error_reset_clocks:
                vals[x - 1] = Fraction(0)
        return DState(tuple(locs), tuple(sorted(intd.items())), tuple(vals))

    # -- moves -------------------------------------------------------------

    def label_succ(self, s: DState, label: str) -> DState | None:
        """Compound successor for a label, mirror rule included."""
        net = self.net
        chosen = []
        owner_missing = False
        for i, comp in enumerate(net.components):
            t = comp.tioa
            if label in t.outputs:
                e = self._edge_for(s, i, label)
                if e is None:
                    owner_missing = True
                    break
                chosen.append((i, e))
            elif label in t.inputs:
                e = self._edge_for(s, i, label)
                if e is not None:
                    chosen.append((i, e))
        if owner_missing or not chosen:
            return None
        mirrored = net.mirror.get(label)
        if mirrored and net.errors_clear(s.ints):
            err_owner = next(
                (i for i, c in enumerate(net.components) if c.error_var), None
            )
            wrong = any(
                i == err_owner and net.components[i].err
                and e.dst == net.components[i].err
                for i, e in chosen
            )
            if not wrong:
                listener = next(
                    (i for i, c in enumerate(net.components)
                     if mirrored in c.tioa.inputs), None
                )
                if listener is not None:
                    e = self._edge_for(s, listener, mirrored)
                    comp = net.components[listener]
                    if e is not None and not (comp.err and e.dst == comp.err):
                        chosen.append((listener, e))
        return self._apply(s, chosen)

    def controllable_succs(self, s: DState):
        for label in sorted(self.net.controllable):
            nxt = self.label_succ(s, label)
            if nxt is not None:
                yield label, nxt

    def uncontrollable_succs(self, s: DState):
        for label in sorted(self.net.uncontrollable):
            nxt = self.label_succ(s, label)
            if nxt is not None:
                yield label, nxt

    def delay_succ(self, s: DState) -> DState:
        """Advance one step, processing every deadline crossing on the way."""
        net = self.net
        remaining = STEP
        locs = list(s.locs)
        intd = dict(s.ints)
        vals = list(s.vals)
        while remaining > 0:
            slack = None
            crossers = []
            for i, comp in enumerate(net.components):
                if not comp.deadlines or (comp.err and locs[i] == comp.err):
                    continue
                off = net.offset(i)
                for c in comp.deadlines.get(locs[i], ()):
                    gap = Fraction(c.value) - vals[off + c.clock - 1]
                    if slack is None or gap < slack:
                        slack, crossers = gap, [i]
                    elif gap == slack and i not in crossers:
                        crossers.append(i)
            if slack is not None and slack < remaining:
                step = max(slack, Fraction(0))
                for ix in range(len(vals)):
                    vals[ix] += step
                remaining -= step
                flip = False
                for i in crossers:
                    comp = net.components[i]
                    locs[i] = comp.err
                    if comp.error_var and intd.get(comp.error_var, 0) == 0:
                        intd[comp.error_var] = 1
                        flip = True
                if flip:
                    for x in net.error_reset_clocks:
                        vals[x - 1] = Fraction(0)
                # the crossing happens the instant the boundary is passed;
                # time then keeps flowing in the loop
            else:
                for ix in range(len(vals)):
                    vals[ix] += remaining
                remaining = Fraction(0)
        capped = tuple(min(v, self.caps[ix]) for ix, v in enumerate(vals))
        return DState(tuple(locs), tuple(sorted(intd.items())), capped)

    def is_bad(self, s: DState) -> bool:
        for region in self.net.bad:
            if not region.matches_key(s.locs, s.ints):
                continue
            if region.fed is None:
                return True
            if any(z.contains(s.vals) for z in region.fed):
                return True
        return False

    # -- solving -----------------------------------------------------------

    def reachable(self) -> set[DState]:
        seen = {self.initial()}
        queue = [self.initial()]
        while queue:
            s = queue.pop()
            succs = [self.delay_succ(s)]
            succs += [t for _l, t in self.uncontrollable_succs(s)]
            succs += [t for _l, t in self.controllable_succs(s)]
            for t in succs:
                if t not in seen:
                    if len(seen) > self.horizon:
                        raise TshieldError("discrete state space exceeds horizon")
                    seen.add(t)
                    queue.append(t)
        return seen

    def solve_safety(self, states: set[DState] | None = None) -> set[DState]:
        """Winning states: the adversary never forces a bad visit."""
        states = states if states is not None else self.reachable()
        lose = {s for s in states if self.is_bad(s)}
        changed = True
        while changed:
            changed = False
            for s in states:
                if s in lose:
                    continue
                if any(t in lose for _l, t in self.uncontrollable_succs(s)):
                    lose.add(s)
                    changed = True
                    continue
                if self.delay_succ(s) in lose and all(
                    t in lose for _l, t in self.controllable_succs(s)
                ):
                    lose.add(s)
                    changed = True
        return states - lose

    def solve_reach(self, goal, states: set[DState], inside: set[DState]):
        """Attractor: the controller forces a goal visit while staying inside."""
        A = {s for s in states if goal(s) and s in inside}
        changed = True
        while changed:
            changed = False
            for s in states:
                if s in A or s not in inside:
                    continue
                unc_ok = all(t in A for _l, t in self.uncontrollable_succs(s))
                ok_delay = self.delay_succ(s) in A
                ok_move = any(t in A for _l, t in self.controllable_succs(s))
                if unc_ok and (ok_delay or ok_move):
                    A.add(s)
                    changed = True
        return A
