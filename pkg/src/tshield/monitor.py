"""Observation monitors and fault hypotheses.

A monitor is an input-only copy of a deterministic specification that walks
along with the observed event stream and drops into an absorbing ERR
location the moment an observed output is not allowed.  Location invariants
cannot survive the transformation (an observer must never block time), so
they are recorded in a deadline map instead; trackers and the game engine
turn a deadline crossing into a forced transition to ERR.

A fault model is the specification twice over, pre- and post-fault copy,
joined by edges realising one transient-error hypothesis.  Its monitor runs
alongside the plain one; reaching ERR discards the hypothesis.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import zones as zn
from .errors import EmptyResult, FaultCapExceeded, ValidationError
from .tioa import Edge, Tioa, _int_guard_holds, _zone_to_guard, complete_inputs

__all__ = [
    "Monitor",
    "FaultKind",
    "FaultModel",
    "build_monitor",
    "prime",
    "gen_fault_models",
    "build_fault_monitors",
    "spec_location",
    "MonitorTracker",
]

ERR = "ERR"
PRE, POST = "@pre", "@post"


def spec_location(loc: str) -> str:
    """Project a fault-model location back onto the specification's."""
    for suffix in (PRE, POST):
        if loc.endswith(suffix):
            return loc[: -len(suffix)]
    return loc


@dataclass(frozen=True)
class Monitor:
    """Input-only observer: ``base`` has no outputs and no invariants; the
    stripped invariants live in ``deadlines``; ERR is absorbing."""

    base: Tioa
    err: str
    deadlines: Mapping[str, tuple[zn.Constraint, ...]]
    error_var: str = ""
    source: str = ""

    @property
    def name(self) -> str:
        return self.base.name

    def allowed_zone(self, loc: str, label: str) -> list[zn.Zone]:
        """Zones where observing ``label`` at ``loc`` does not enter ERR."""
        out = []
        for e in self.base.edges_from(loc, label):
            if e.dst != self.err:
                out.append(self.base.guard_zone(e.guard))
        return zn.fed_reduce(out)


@dataclass(frozen=True)
class FaultKind:
    """One of the five transient-fault families.

    ``kind`` is "any_location", "next_location", "wrong_reset",
    "swapped_clocks" or "missing_reset".  ``clocks`` narrows wrong-reset
    faults to particular clocks (local indices); ``permutations`` lists the
    clock permutations for swapped-clocks faults, each as a mapping
    dst_clock <- src_clock over local indices.
    """

    kind: str
    clocks: tuple[int, ...] = ()
    permutations: tuple[tuple[tuple[int, int], ...], ...] = ()

    KINDS = ("any_location", "next_location", "wrong_reset", "swapped_clocks", "missing_reset")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown fault kind {self.kind!r}")


@dataclass(frozen=True)
class FaultModel:
    kind: FaultKind
    label: str          # short instance id, e.g. "wrong_reset[OFF,off,x]"
    tioa: Tioa          # pre+post copies joined by the fault edge(s)

    def pre_copy(self) -> Tioa:
        """The pre-fault fragment alone, with locations renamed back, for
        refinement-style sanity checks."""
        keep = [loc for loc in self.tioa.locations if loc.endswith(PRE)]
        edges = tuple(
            replace(e, src=spec_location(e.src), dst=spec_location(e.dst))
            for e in self.tioa.edges
            if e.src in keep and e.dst in keep and e.tag != "fault"
        )
        return Tioa(
            name=f"{self.tioa.name}.pre",
            clocks=self.tioa.clocks,
            locations=tuple(spec_location(l) for l in keep),
            invariants={
                spec_location(l): self.tioa.invariant_of(l) for l in keep
            },
            initial=spec_location(self.tioa.initial),
            inputs=self.tioa.inputs,
            outputs=self.tioa.outputs,
            edges=edges,
            int_vars=self.tioa.int_vars,
        )


# ------------------------------------------------------------------ monitor


def _allowed_feds(spec: Tioa) -> dict[tuple[str, str], list[zn.Zone]]:
    """Per (location, output): zones where emitting it is allowed, taking the
    source invariant and the un-reset part of the target invariant into
    account."""
    out: dict[tuple[str, str], list[zn.Zone]] = {}
    for loc in spec.locations:
        for o in sorted(spec.outputs):
            fed = []
            for e in spec.edges_from(loc, o):
                cons = list(e.guard) + list(spec.invariant_of(loc))
                for c in spec.invariant_of(e.dst):
                    if c.clock not in e.resets:
                        cons.append(c)
                z = spec.guard_zone(cons)
                if not z.is_empty():
                    fed.append(z)
            out[(loc, o)] = zn.fed_reduce(fed)
    return out


def _disjoint(fed: Sequence[zn.Zone]) -> list[zn.Zone]:
    """Pairwise-disjoint cover of the same union (guards must not overlap
    or the determinism check would reject the automaton)."""
    out: list[zn.Zone] = []
    rest = [z for z in fed if not z.is_empty()]
    while rest:
        z, rest = rest[0], rest[1:]
        out.append(z)
        rest = zn.fed_subtract(rest, [z])
    return out


def build_monitor(spec: Tioa, *, name: str | None = None, error_var: str = "") -> Monitor:
    """Turn a deterministic specification into an observation monitor.

    Outputs become inputs; for every location and observable output the
    disallowed region gets an edge into the absorbing ERR location; location
    invariants are removed and returned as the deadline map.
    """
    spec.check_deterministic()
    if ERR in spec.locations:
        raise ValidationError(f"{spec.name}: location name {ERR!r} is reserved")
    universe = zn.zone_universe(len(spec.clocks))
    allowed = _allowed_feds(spec)

    edges: list[Edge] = []
    err_update = ((error_var, 1),) if error_var else ()
    for e in spec.edges:
        if e.action in spec.outputs:
            # the stripped invariants must live on in the edge guards, or the
            # allowed and ERR regions would overlap
            cons = list(e.guard) + list(spec.invariant_of(e.src))
            for c in spec.invariant_of(e.dst):
                if c.clock not in e.resets:
                    cons.append(c)
            z = spec.guard_zone(cons)
            if z.is_empty():
                continue
            edges.append(replace(e, guard=_zone_to_guard(z)))
        else:
            edges.append(replace(e))
    for loc in spec.locations:
        for o in sorted(spec.outputs):
            wrong = _disjoint(zn.fed_subtract([universe], allowed[(loc, o)]))
            for piece in wrong:
                edges.append(
                    Edge(loc, _zone_to_guard(piece), o, (), ERR, int_update=err_update)
                )
    for label in sorted(set(spec.inputs) | set(spec.outputs)):
        edges.append(Edge(ERR, (), label, (), ERR))

    int_vars = dict(spec.int_vars)
    if error_var:
        int_vars.setdefault(error_var, (0, 1, 0))

    base = Tioa(
        name=name or f"m_{spec.name}",
        clocks=spec.clocks,
        locations=spec.locations + (ERR,),
        invariants={},
        initial=spec.initial,
        inputs=tuple(sorted(set(spec.inputs) | set(spec.outputs))),
        outputs=(),
        edges=tuple(edges),
        int_vars=int_vars,
    )
    base = complete_inputs(base)
    base.check_deterministic()
    deadlines = {
        loc: tuple(spec.invariant_of(loc)) for loc in spec.locations if spec.invariant_of(loc)
    }
    return Monitor(base, ERR, deadlines, error_var=error_var, source=spec.name)


def prime(spec: Tioa, *, name: str | None = None) -> Tioa:
    """Rename every output o to o'; everything else is untouched."""
    for o in spec.outputs:
        if o.endswith("'"):
            raise ValidationError(f"{spec.name}: output {o!r} already primed")
    mapping = {o: o + "'" for o in spec.outputs}
    edges = tuple(
        replace(e, action=mapping.get(e.action, e.action)) for e in spec.edges
    )
    return Tioa(
        name=name or f"{spec.name}'",
        clocks=spec.clocks,
        locations=spec.locations,
        invariants=dict(spec.invariants),
        initial=spec.initial,
        inputs=spec.inputs,
        outputs=tuple(mapping[o] for o in spec.outputs),
        edges=edges,
        int_vars=dict(spec.int_vars),
    )


# -------------------------------------------------------------- fault models


def _wrong_regions(spec: Tioa, allowed) -> dict[tuple[str, str], list[zn.Zone]]:
    universe = zn.zone_universe(len(spec.clocks))
    return {
        key: _disjoint(zn.fed_subtract([universe], fed))
        for key, fed in allowed.items()
    }


def _two_copy_base(spec: Tioa) -> tuple[list[str], dict, list[Edge]]:
    locations = [l + PRE for l in spec.locations] + [l + POST for l in spec.locations]
    invariants = {}
    for l in spec.locations:
        inv = spec.invariant_of(l)
        if inv:
            invariants[l + PRE] = inv
            invariants[l + POST] = inv
    edges = []
    for suffix in (PRE, POST):
        for e in spec.edges:
            edges.append(replace(e, src=e.src + suffix, dst=e.dst + suffix))
    return locations, invariants, edges


def _instantiate(spec: Tioa, kind: FaultKind, label: str,
                 fault_edges: list[Edge], drop: frozenset = frozenset()) -> FaultModel:
    locations, invariants, edges = _two_copy_base(spec)
    if drop:
        edges = [
            e for e in edges if (e.src, e.action, e.dst, e.guard) not in drop
        ]
    tioa = Tioa(
        name=label,
        clocks=spec.clocks,
        locations=tuple(locations),
        invariants=invariants,
        initial=spec.initial + PRE,
        inputs=spec.inputs,
        outputs=spec.outputs,
        edges=tuple(edges) + tuple(fault_edges),
        int_vars=dict(spec.int_vars),
    )
    tioa.check_deterministic()
    return FaultModel(kind, label, tioa)


def gen_fault_models(spec: Tioa, kinds: Iterable[FaultKind], *, cap: int = 64,
                     only: Iterable[str] | None = None) -> list[FaultModel]:
    """Enumerate concrete fault instances for the requested kinds.

    Ordering is deterministic (kind order as given, then lexicographic by
    location, label and parameter).  More than ``cap`` instances is an error
    rather than a silent truncation.  ``only`` keeps just the instances whose
    label matches one of the given strings (exact or prefix).
    """
    spec.check_deterministic()
    if not spec.outputs:
        raise EmptyResult(f"{spec.name} has no outputs to observe faults on")
    allowed = _allowed_feds(spec)
    wrong = _wrong_regions(spec, allowed)
    out: list[FaultModel] = []

    def wrong_edges(loc: str, o: str, dst: str, resets=(), swaps=()) -> list[Edge]:
        return [
            Edge(loc + PRE, _zone_to_guard(piece), o, tuple(resets), dst,
                 swaps=tuple(swaps), tag="fault")
            for piece in wrong[(loc, o)]
        ]

    for kind in kinds:
        if kind.kind == "any_location":
            for loc in spec.locations:
                for o in sorted(spec.outputs):
                    if not wrong[(loc, o)]:
                        continue
                    for target in spec.locations:
                        out.append(_instantiate(
                            spec, kind, f"any_location[{loc},{o},{target}]",
                            wrong_edges(loc, o, target + POST)))
        elif kind.kind == "next_location":
            for loc in spec.locations:
                succs = sorted({e.dst for e in spec.edges_from(loc)})
                for o in sorted(spec.outputs):
                    if not wrong[(loc, o)]:
                        continue
                    for target in succs:
                        out.append(_instantiate(
                            spec, kind, f"next_location[{loc},{o},{target}]",
                            wrong_edges(loc, o, target + POST)))
        elif kind.kind == "wrong_reset":
            which = kind.clocks or tuple(range(1, len(spec.clocks) + 1))
            for loc in spec.locations:
                for o in sorted(spec.outputs):
                    if not wrong[(loc, o)]:
                        continue
                    for clk in which:
                        cname = spec.clocks[clk - 1]
                        out.append(_instantiate(
                            spec, kind, f"wrong_reset[{loc},{o},{cname}]",
                            wrong_edges(loc, o, loc + POST, resets=(clk,))))
        elif kind.kind == "swapped_clocks":
            if not kind.permutations:
                raise ValidationError("swapped_clocks needs explicit permutations")
            for p_idx, perm in enumerate(kind.permutations):
                for loc in spec.locations:
                    for o in sorted(spec.outputs):
                        if not wrong[(loc, o)]:
                            continue
                        out.append(_instantiate(
                            spec, kind, f"swapped_clocks[{loc},{o},p{p_idx}]",
                            wrong_edges(loc, o, loc + POST, swaps=perm)))
        elif kind.kind == "missing_reset":
            for e_idx, e in enumerate(spec.edges):
                if e.action not in spec.outputs or not e.resets:
                    continue
                # redirect the planned edge itself: the hypothesis is that its
                # first firing forgot the reset
                fault = Edge(e.src + PRE, e.guard, e.action, (), e.dst + POST,
                             int_guard=e.int_guard, int_update=e.int_update, tag="fault")
                drop = frozenset({(e.src + PRE, e.action, e.dst + PRE, e.guard)})
                out.append(_instantiate(
                    spec, kind,
                    f"missing_reset[{e.src},{e.action},{e_idx}]",
                    [fault], drop=drop))
        if len(out) > cap:
            raise FaultCapExceeded(f"{len(out)} fault instances exceed cap {cap}")
    if only is not None:
        wanted = list(only)
        out = [
            fm for fm in out
            if any(fm.label == w or fm.label.startswith(w) for w in wanted)
        ]
    return out


def build_fault_monitors(fault_models: Iterable[FaultModel], *, start: int = 0) -> list[Monitor]:
    """Monitors for fault models, named mF0, mF1, ... in enumeration order."""
    out = []
    for i, fm in enumerate(fault_models, start=start):
        out.append(build_monitor(fm.tioa, name=f"mF{i}"))
    return out


# ------------------------------------------------------------------ tracking


class MonitorTracker:
    """Concrete monitor state with forced deadline crossings.

    One tracker follows one monitor through an observed event stream;
    advancing time across the location deadline moves the monitor to ERR at
    the boundary, exactly like the virtual deadline-miss event of the game.
    """

    def __init__(self, monitor: Monitor):
        self.monitor = monitor
        self.loc = monitor.base.initial
        self.vals = [Fraction(0)] * len(monitor.base.clocks)
        self.ints = {v: init for v, (_l, _h, init) in monitor.base.int_vars.items()}

    def clone(self) -> "MonitorTracker":
        t = MonitorTracker.__new__(MonitorTracker)
        t.monitor = self.monitor
        t.loc = self.loc
        t.vals = list(self.vals)
        t.ints = dict(self.ints)
        return t

    @property
    def in_err(self) -> bool:
        return self.loc == self.monitor.err

    def deadline_slack(self) -> Fraction | None:
        """Time remaining before the current deadline; None when unbounded."""
        best = None
        for c in self.monitor.deadlines.get(self.loc, ()):
            slack = Fraction(c.value) - self.vals[c.clock - 1]
            if best is None or slack < best:
                best = slack
        return best

    def advance(self, d: Fraction) -> None:
        """Advance time, entering ERR when a deadline is crossed."""
        d = Fraction(d)
        slack = self.deadline_slack()
        if slack is not None and d > slack:
            for i in range(len(self.vals)):
                self.vals[i] += slack
            self._enter_err()
            d = d - slack
        for i in range(len(self.vals)):
            self.vals[i] += d

    def _enter_err(self):
        self.loc = self.monitor.err
        if self.monitor.error_var:
            self.ints[self.monitor.error_var] = 1

    def _guard_holds(self, guard) -> bool:
        for c in guard:
            vi = self.vals[c.clock - 1] if c.clock else Fraction(0)
            vo = self.vals[c.other - 1] if c.other else Fraction(0)
            d, v = vi - vo, Fraction(c.value)
            if c.rel == "<" and not d < v:
                return False
            if c.rel == "<=" and not d <= v:
                return False
            if c.rel == ">=" and not d >= v:
                return False
            if c.rel == ">" and not d > v:
                return False
        return True

    def observe(self, label: str) -> None:
        """Feed one observed action; unknown labels are ignored quietly."""
        base = self.monitor.base
        if label not in base.inputs:
            return
        for e in base.edges_from(self.loc, label):
            if not _int_guard_holds(e.int_guard, self.ints):
                continue
            if self._guard_holds(e.guard):
                if e.swaps:
                    snap = list(self.vals)
                    for dst_c, src_c in e.swaps:
                        self.vals[dst_c - 1] = snap[src_c - 1]
                for x in e.resets:
                    self.vals[x - 1] = Fraction(0)
                for var, value in e.int_update:
                    self.ints[var] = value
                if e.dst == self.monitor.err and self.monitor.error_var:
                    self.ints[self.monitor.error_var] = 1
                self.loc = e.dst
                return
        # complete monitors always have a matching edge; falling through
        # means the label is not part of this monitor's alphabet

    def state(self) -> tuple[str, tuple[Fraction, ...]]:
        return self.loc, tuple(self.vals)
