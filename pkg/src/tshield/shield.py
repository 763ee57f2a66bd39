"""Shield synthesis: plain post-shields, post-shields with recovery
guarantees, and pre-shields.

A shield bundles the game network (monitors plus the one controllable
component), the solved winning region, the maximally permissive strategy and
the last-chance boundary.  Post-shields observe the system and may forward,
suppress or substitute outputs (emitted on the primed alphabet); pre-shields
publish the set of currently safe actions instead.

Recovery shields add one monitor per transient-fault hypothesis and a
stopwatch that starts when the plain monitor first flags an error; the
winning region then also guarantees that all surviving hypotheses re-align
with the shield within the bound, so the plain safety strategy doubles as
the recovery strategy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import zones as zn
from .errors import InitialStateLosing, UnboundedRecoveryUndecided, ValidationError
from .game import (
    Arena,
    BadRegion,
    GameNet,
    RecoveryGoal,
    Strategy,
    attractor,
    boundary,
    explore,
    goal_map,
    recovery_goal,
    solve_leadsto,
    solve_safety,
)
from .monitor import (
    ERR,
    FaultKind,
    FaultModel,
    Monitor,
    build_fault_monitors,
    build_monitor,
    gen_fault_models,
    prime,
)
from .tioa import Edge, Tioa

__all__ = [
    "ShieldKind",
    "Shield",
    "build_ctr_post",
    "build_ctr_pre",
    "synth_post",
    "synth_post_recovery",
    "synth_pre",
    "enabled_actions_by_zone",
]

CTR_LOC = "C"


@dataclass(frozen=True)
class ShieldKind:
    kind: str                  # "post" | "post_recover" | "pre"
    bound: int | None = None   # recovery bound, None = unbounded

    def __post_init__(self):
        if self.kind not in ("post", "post_recover", "pre"):
            raise ValidationError(f"unknown shield kind {self.kind!r}")


@dataclass
class Shield:
    kind: ShieldKind
    spec: Tioa
    net: GameNet
    winning: dict              # key -> [Zone]
    strategy: Strategy
    boundary: dict             # key -> [Zone]
    monitors: tuple[Monitor, ...]        # in component order (Ctr excluded)
    fault_models: tuple[FaultModel, ...] = ()
    goal: RecoveryGoal | None = None
    attractor_region: dict = field(default_factory=dict)
    goal_region: dict = field(default_factory=dict)

    @property
    def controllable(self) -> frozenset:
        return self.net.controllable

    def initial_key(self):
        return self.net.initial_key()


# ------------------------------------------------------------------- post


def build_ctr_post(spec: Tioa) -> Tioa:
    """Control options of a post-shield: per output, a mirror edge (forward
    the observed action while no error is flagged), a post-fault edge (free
    choice once the error flag is up) and a last-chance edge (free choice at
    the boundary, gated on the winning region at runtime)."""
    edges = []
    for o in sorted(spec.outputs):
        primed = o + "'"
        edges.append(Edge(CTR_LOC, (), primed, (), CTR_LOC,
                          int_guard=(("error", "==", 0),), link=o, tag="mirror"))
        edges.append(Edge(CTR_LOC, (), primed, (), CTR_LOC,
                          int_guard=(("error", "==", 1),), tag="post_fault"))
        edges.append(Edge(CTR_LOC, (), primed, (), CTR_LOC,
                          int_guard=(("error", "==", 0),), tag="last_chance"))
    return Tioa(
        name="Ctr",
        clocks=(),
        locations=(CTR_LOC,),
        invariants={},
        initial=CTR_LOC,
        inputs=(),
        outputs=tuple(sorted(o + "'" for o in spec.outputs)),
        edges=tuple(edges),
        int_vars={"error": (0, 1, 0)},
    )


def _post_net(spec: Tioa, fault_monitors: Sequence[Monitor] = (),
              with_stopwatch: bool = False,
              stopwatch_ceiling: int = 1) -> tuple[GameNet, int]:
    mspec = build_monitor(spec, name="mSpec", error_var="error")
    mprimed = build_monitor(prime(spec), name="mSpecP")
    ctr = build_ctr_post(spec)
    components = list(fault_monitors) + [mspec, mprimed, ctr]
    primed_idx = len(fault_monitors) + 1
    n_comp_clocks = sum(
        len(c.base.clocks if isinstance(c, Monitor) else c.clocks)
        for c in components
    )
    extra_clocks = ("rec",) if with_stopwatch else ()
    rec_idx = n_comp_clocks + 1 if with_stopwatch else 0
    net = GameNet(
        components,
        controllable=sorted(o + "'" for o in spec.outputs),
        uncontrollable=sorted(set(spec.outputs) | set(spec.inputs)),
        bad=[BadRegion(locs=((primed_idx, frozenset({ERR})),))],
        mirror={o: o + "'" for o in sorted(spec.outputs)},
        extra_clocks=extra_clocks,
        error_reset_clocks=(rec_idx,) if with_stopwatch else (),
        extra_max_consts={rec_idx: stopwatch_ceiling} if with_stopwatch else None,
    )
    return net, primed_idx


def synth_post(spec: Tioa) -> Shield:
    """Plain post-shield: keep the primed monitor out of ERR forever."""
    spec.check_deterministic()
    net, primed_idx = _post_net(spec)
    arena, W, strategy = solve_safety(net)
    mons = tuple(
        Monitor(c.tioa, c.err, dict(c.deadlines), c.error_var)
        for c in net.components[:-1]
    )
    return Shield(
        kind=ShieldKind("post"),
        spec=spec,
        net=net,
        winning=W,
        strategy=strategy,
        boundary=boundary(arena, W),
        monitors=mons,
    )


def synth_post_recovery(spec: Tioa, kinds: Iterable[FaultKind],
                        bound: int | None = None, *, cap: int = 64,
                        only: Iterable[str] | None = None) -> Shield:
    """Post-shield with guaranteed (optionally time-bounded) recovery.

    The game composes one monitor per fault hypothesis with the plain and
    primed monitors; winning demands the primed monitor stays safe and, once
    the error flag rises, all live hypotheses re-align with the shield
    within the bound.  Without a bound, a stabilisation check solves the
    game at a structural horizon and again at twice that horizon; a strategy
    difference raises UnboundedRecoveryUndecided.  ``only`` narrows the
    enumeration to specific fault instances by label.
    """
    spec.check_deterministic()
    kinds = list(kinds)
    fms = tuple(gen_fault_models(spec, kinds, cap=cap, only=only)) if kinds else ()
    if bound is not None:
        return _solve_recovery(spec, fms, bound, declared_bound=bound)
    # structural horizon: symbolic state count times (max constant + 1)
    probe_net, _ = _post_net(spec, build_fault_monitors(fms), with_stopwatch=True)
    probe = explore(probe_net)
    horizon = max(1, len(probe.order)) * (spec.max_constant() + 1)
    first = _solve_recovery(spec, fms, horizon, declared_bound=None)
    second = _solve_recovery(spec, fms, 2 * horizon, declared_bound=None)
    if not _strategies_match(first, second):
        raise UnboundedRecoveryUndecided(
            f"strategy changed between horizons {horizon} and {2 * horizon}"
        )
    return first


def _solve_recovery(spec: Tioa, fms, bound: int, declared_bound: int | None) -> Shield:
    fmons = build_fault_monitors(fms)
    net, primed_idx = _post_net(
        spec, fmons, with_stopwatch=True, stopwatch_ceiling=bound + 1
    )
    goal = recovery_goal(net, tuple(range(len(fmons))), primed_idx)
    arena, W, strategy, A, goals = solve_leadsto(net, goal, bound=bound)
    mons = tuple(
        Monitor(c.tioa, c.err, dict(c.deadlines), c.error_var)
        for c in net.components[:-1]
    )
    return Shield(
        kind=ShieldKind("post_recover", declared_bound if declared_bound is not None else bound),
        spec=spec,
        net=net,
        winning=W,
        strategy=strategy,
        boundary=boundary(arena, W),
        monitors=mons,
        fault_models=tuple(fms),
        goal=goal,
        attractor_region=A,
        goal_region=goals,
    )


def _strategies_match(a: Shield, b: Shield) -> bool:
    """Same winning verdicts and the same strategy once the stopwatch is
    projected away."""
    rec_a = a.net.extra_clock_index("rec")
    rec_b = b.net.extra_clock_index("rec")
    keys = set(a.strategy.allowed) | set(b.strategy.allowed)
    for key in keys:
        la = a.strategy.allowed.get(key, {})
        lb = b.strategy.allowed.get(key, {})
        if set(la) != set(lb):
            return False
        for label in la:
            fa = [zn.free(z, [rec_a]) for z in la[label]]
            fb = [zn.free(z, [rec_b]) for z in lb[label]]
            if not zn.fed_equal(fa, fb):
                return False
    return True


# -------------------------------------------------------------------- pre


def build_ctr_pre(spec: Tioa) -> Tioa:
    """Unrestricted control options: one unguarded self-loop per output."""
    edges = tuple(
        Edge(CTR_LOC, (), o, (), CTR_LOC) for o in sorted(spec.outputs)
    )
    return Tioa(
        name="Ctr",
        clocks=(),
        locations=(CTR_LOC,),
        invariants={},
        initial=CTR_LOC,
        inputs=(),
        outputs=tuple(sorted(spec.outputs)),
        edges=edges,
    )


def synth_pre(spec: Tioa) -> Shield:
    """Pre-shield: the maximally permissive strategy over the plain monitor
    becomes the published action sets."""
    spec.check_deterministic()
    mspec = build_monitor(spec, name="mSpec")
    ctr = build_ctr_pre(spec)
    net = GameNet(
        [mspec, ctr],
        controllable=sorted(spec.outputs),
        uncontrollable=sorted(spec.inputs),
        bad=[BadRegion(locs=((0, frozenset({ERR})),))],
    )
    arena, W, strategy = solve_safety(net)
    return Shield(
        kind=ShieldKind("pre"),
        spec=spec,
        net=net,
        winning=W,
        strategy=strategy,
        boundary=boundary(arena, W),
        monitors=(mspec,),
    )


# --------------------------------------------------- zone-wise action sets


def enabled_actions_by_zone(shield: Shield, key, fed: Sequence[zn.Zone]):
    """Partition the delay future of a symbolic state into maximal pieces of
    constant allowed-action set, ordered by the delay needed to reach them.

    Returns a list of (zone, actions, delay_allowed) with the flag following
    the published-action protocol: inside a piece the system may wait as
    long as some later piece still offers actions (or the piece never ends);
    in the final piece that offers actions waiting forfeits them.
    """
    future = [zn.up(z) for z in fed]
    pieces: list[tuple[zn.Zone, frozenset]] = [
        (z, frozenset()) for z in future if not z.is_empty()
    ]
    for label in sorted(shield.strategy.allowed.get(key, {})):
        lab_fed = shield.strategy.allowed[key][label]
        nxt = []
        for piece, acts in pieces:
            inside = zn.fed_intersect([piece], lab_fed)
            outside = zn.fed_subtract([piece], lab_fed)
            nxt.extend((z, acts | {label}) for z in inside)
            nxt.extend((z, acts) for z in outside)
        pieces = nxt
    # merge pieces with identical action sets when one subsumes another
    merged: dict[frozenset, list[zn.Zone]] = {}
    for z, acts in pieces:
        merged.setdefault(acts, []).append(z)
    flat: list[tuple[zn.Zone, frozenset]] = []
    for acts, zs in merged.items():
        for z in zn.fed_reduce(zs):
            flat.append((z, acts))
    anchor = None
    for z in fed:
        if not z.is_empty():
            anchor = z.sample()
            break
    if anchor is None:
        return []

    from .game import _delay_interval

    def entry_delay(z):
        iv = _delay_interval(anchor, z)
        if iv is None:
            return (1, Fraction(0), z.pretty())
        lo, lo_strict, _hi, _hs = iv
        return (0, lo, z.pretty())

    flat.sort(key=lambda item: entry_delay(item[0]))
    out = []
    for i, (z, acts) in enumerate(flat):
        later = any(a for _z, a in flat[i + 1:])
        out.append((z, acts, bool(later) or _ray_unbounded(anchor, z)))
    return out


def _ray_unbounded(anchor, z) -> bool:
    from .game import _delay_interval

    iv = _delay_interval(anchor, z)
    return iv is not None and iv[2] is None
